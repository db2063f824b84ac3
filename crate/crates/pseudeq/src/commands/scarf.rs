use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use pseudeq_core::exchange::scarf_economy;
use pseudeq_core::rng;
use pseudeq_core::solvers::{tatonnement_from, StepDirection};

use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{Manifest, ManifestBuilder};

pub const TRAJECTORY: &str = "trajectory.csv";
pub const SUMMARY: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScarfConfig {
    /// Half-width of the uniform perturbation of each starting price.
    pub noise_scale: f64,
    pub iters: usize,
    pub eta0: f64,
    pub direction: String,
}

impl Default for ScarfConfig {
    fn default() -> Self {
        ScarfConfig { noise_scale: 1e-2, iters: 500, eta0: 1.0, direction: "decreasing".into() }
    }
}

const EQUILIBRIUM: f64 = 1.0 / 3.0;

pub fn distance_to_equilibrium(p: &[f64]) -> f64 {
    p.iter().map(|x| (x - EQUILIBRIUM) * (x - EQUILIBRIUM)).sum::<f64>().sqrt()
}

/// Perturbed start `1/3 + Unif(-s, s)` per good.
pub fn start_prices(noise_scale: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..3)
        .map(|_| if noise_scale > 0.0 { EQUILIBRIUM + r.gen_range(-noise_scale..noise_scale) } else { EQUILIBRIUM })
        .collect()
}

/// Tâtonnement on the Scarf economy from a perturbed equilibrium. Writes the
/// price path (one row per step, `iters + 1` rows unless prices diverge)
/// and the initial and final distances to the equilibrium.
pub fn run(config: &ScarfConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let mut builder = ManifestBuilder::start("scarf", config, seed)?;
    if !(config.noise_scale >= 0.0 && config.noise_scale < EQUILIBRIUM) {
        return Err(HarnessError::validation(format!("noise_scale {} must lie in [0, 1/3)", config.noise_scale)));
    }
    let direction = StepDirection::from_name(&config.direction)
        .ok_or_else(|| HarnessError::validation(format!("unknown step direction {:?}", config.direction)))?;
    let start = start_prices(config.noise_scale, seed);
    let run = tatonnement_from(&scarf_economy(), &start, config.eta0, config.iters, direction)?;
    if run.diverged {
        builder.status("diverged");
    }
    let rows: Vec<Vec<String>> = run
        .prices
        .iter()
        .enumerate()
        .map(|(t, p)| std::iter::once(t.to_string()).chain(p.iter().map(|x| io::fmt17(*x))).collect())
        .collect();
    io::create_dir(out)?;
    io::write_csv(&out.join(TRAJECTORY), &["step", "p1", "p2", "p3"], &rows)?;
    let d0 = distance_to_equilibrium(&run.prices[0]);
    let d1 = distance_to_equilibrium(run.final_prices());
    io::write_csv(
        &out.join(SUMMARY),
        &["initial_distance", "final_distance", "moved_away"],
        &[vec![io::fmt17(d0), io::fmt17(d1), ((d1 > d0) as u8).to_string()]],
    )?;
    builder.finish(out, &[TRAJECTORY, SUMMARY])
}
