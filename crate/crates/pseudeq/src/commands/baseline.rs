use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pseudeq_core::exchange::{ExchangeEconomy, ExchangeGame};
use pseudeq_core::pseudogame::{self, PseudoGame};
use pseudeq_core::rng;
use pseudeq_core::solvers::{exploitability_descent, select_eta, tatonnement, GaesProblem, StepDirection, ETA_GRID};

use super::eval::norm_seed;
use super::{problems, timed, write_metrics, Problems};
use crate::dataset::{self, Dataset};
use crate::dto::ProblemKind;
use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{Manifest, ManifestBuilder};

pub const SELECTION: &str = "selection.csv";
pub const METRICS: &str = "metrics.csv";
pub const METRIC_COLUMNS: [&str; 5] =
    ["initial_exploitability", "exploitability", "normalized_exploitability", "diverged", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Price adjustment from uniform prices; exchange economies only.
    Tatonnement,
    /// Projected exploitability descent from a sampled feasible profile.
    ExploitDescent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub dataset: PathBuf,
    pub method: Method,
    pub eta_grid: Vec<f64>,
    pub iters: usize,
    /// `decreasing` or `increasing`; tâtonnement only.
    pub direction: String,
    pub n_norm_samples: usize,
    pub record_time: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            dataset: PathBuf::from("data"),
            method: Method::Tatonnement,
            eta_grid: ETA_GRID.to_vec(),
            iters: 500,
            direction: "decreasing".into(),
            n_norm_samples: 1000,
            record_time: false,
        }
    }
}

/// One grid point of the learning-rate search.
struct GridPoint {
    eta: f64,
    mean: f64,
    diverged: usize,
}

fn pick(grid: &[GridPoint]) -> usize {
    let better = |k: usize, b: usize| {
        grid[k].diverged < grid[b].diverged || (grid[k].diverged == grid[b].diverged && grid[k].mean < grid[b].mean)
    };
    (0..grid.len()).fold(0, |b, k| if better(k, b) { k } else { b })
}

fn tatonnement_rows(
    test: &[ExchangeEconomy],
    eta: f64,
    config: &BaselineConfig,
    direction: StepDirection,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    test.par_iter()
        .enumerate()
        .map(|(k, e)| {
            let (run, ms) = timed(config.record_time, || tatonnement(e, eta, config.iters, direction));
            let run = run?;
            let game = ExchangeGame::new(e.clone());
            let phi = run.final_exploitability();
            let denom = pseudogame::mean_sampled_exploitability(&game, config.n_norm_samples, norm_seed(seed, k))?;
            let first = run.trajectory.points()[0].exploitability;
            Ok(vec![first, phi, phi / denom, run.diverged as u8 as f64, ms])
        })
        .collect()
}

/// Final exploitability of descent from the sampled start of row `k`.
fn descend(game: &dyn PseudoGame, start_seed: u64, k: usize, eta: f64, iters: usize) -> Result<(f64, f64)> {
    let start = game
        .sample_feasible(&mut rng::derive(start_seed, k as u64))
        .ok_or_else(|| HarnessError::validation("feasible sampler gave up"))?;
    let run = exploitability_descent(game, &start, eta, iters)?;
    let points = run.trajectory.points();
    Ok((points[0].exploitability, points[points.len() - 1].exploitability))
}

fn descent_grid<P: GaesProblem + Sync>(valid: &[P], config: &BaselineConfig, start_seed: u64) -> Result<Vec<GridPoint>> {
    config
        .eta_grid
        .iter()
        .map(|&eta| {
            let finals = valid
                .par_iter()
                .enumerate()
                .map(|(k, p)| descend(p.game(), start_seed, k, eta, config.iters).map(|r| r.1))
                .collect::<Result<Vec<_>>>()?;
            let diverged = finals.iter().filter(|x| !x.is_finite()).count();
            let mean = finals.iter().sum::<f64>() / finals.len() as f64;
            Ok(GridPoint { eta, mean, diverged })
        })
        .collect()
}

fn descent_rows<P: GaesProblem + Sync>(test: &[P], eta: f64, config: &BaselineConfig, start_seed: u64, seed: u64) -> Result<Vec<Vec<f64>>> {
    test.par_iter()
        .enumerate()
        .map(|(k, p)| {
            let (r, ms) = timed(config.record_time, || descend(p.game(), start_seed, k, eta, config.iters));
            let (first, phi) = r?;
            let denom = pseudogame::mean_sampled_exploitability(p.game(), config.n_norm_samples, norm_seed(seed, k))?;
            Ok(vec![first, phi, phi / denom, (!phi.is_finite()) as u8 as f64, ms])
        })
        .collect()
}

/// Selects the step size on the valid split (fewest divergent runs, then
/// lowest mean final exploitability) and reports test-split metrics at it.
pub fn run(config: &BaselineConfig, seed: u64, out: &Path) -> Result<Manifest> {
    let mut builder = ManifestBuilder::start("baseline", config, seed)?;
    if config.eta_grid.is_empty() || config.eta_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(HarnessError::validation("eta_grid must hold positive learning rates"));
    }
    let direction = StepDirection::from_name(&config.direction)
        .ok_or_else(|| HarnessError::validation(format!("unknown step direction {:?}", config.direction)))?;
    let data = Dataset::load(&config.dataset)?;
    builder.dataset(&config.dataset, data.hash.clone());
    if data.valid.is_empty() || data.test.is_empty() {
        return Err(HarnessError::validation("baselines need nonempty valid and test splits"));
    }
    let start_seed = rng::derive(seed, 1).next_u64();
    let (grid, detail) = match config.method {
        Method::Tatonnement => {
            if data.kind != ProblemKind::Exchange {
                return Err(HarnessError::validation("tatonnement runs on exchange economies only"));
            }
            let valid = dataset::economies(&data.valid)?;
            let test = dataset::economies(&data.test)?;
            let sel = select_eta(&valid, &config.eta_grid, config.iters, direction)?;
            let grid: Vec<GridPoint> = sel
                .means
                .iter()
                .zip(&sel.diverged)
                .map(|(&(eta, mean), &diverged)| GridPoint { eta, mean, diverged })
                .collect();
            let detail = tatonnement_rows(&test, sel.eta, config, direction, seed)?;
            (grid, detail)
        }
        Method::ExploitDescent => {
            let rows = if data.kind == ProblemKind::Kyoto { super::kyoto_rows(&data)? } else { 0 };
            match (problems(data.kind, &data.valid, rows)?, problems(data.kind, &data.test, rows)?) {
                (Problems::Exchange(v), Problems::Exchange(t)) => {
                    let grid = descent_grid(&v, config, start_seed)?;
                    let eta = grid[pick(&grid)].eta;
                    (grid, descent_rows(&t, eta, config, start_seed, seed)?)
                }
                (Problems::Kyoto(v), Problems::Kyoto(t)) => {
                    let grid = descent_grid(&v, config, start_seed)?;
                    let eta = grid[pick(&grid)].eta;
                    (grid, descent_rows(&t, eta, config, start_seed, seed)?)
                }
                _ => unreachable!("splits share the dataset kind"),
            }
        }
    };
    let best = pick(&grid);
    let runs = data.valid.len();
    if grid.iter().all(|g| g.diverged == runs) {
        builder.note("every grid point diverged on the valid split; the selected rate is the best truncated run");
    }
    builder.note(format!("selected eta {}", io::fmt17(grid[best].eta)));
    io::create_dir(out)?;
    let sel_rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(k, g)| {
            vec![io::fmt17(g.eta), io::fmt17(g.mean), g.diverged.to_string(), ((k == best) as u8).to_string()]
        })
        .collect();
    io::write_csv(&out.join(SELECTION), &["eta", "mean_exploitability", "diverged_runs", "selected"], &sel_rows)?;
    write_metrics(&out.join(METRICS), &METRIC_COLUMNS, &detail)?;
    builder.finish(out, &[SELECTION, METRICS])
}
