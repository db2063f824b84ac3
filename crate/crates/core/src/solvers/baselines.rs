use alloc::format;
use alloc::vec::Vec;

use super::{Trajectory, TrajectoryPoint};
use crate::exchange::{floor_prices, ExchangeEconomy, ExchangeGame};
use crate::math;
use crate::pseudogame::{self, PseudoGame};
use crate::{Error, Result};

/// Learning rates searched by [`select_eta`].
pub const ETA_GRID: [f64; 9] = [1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];

/// Unnormalized price norm beyond which tâtonnement counts as divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// How the step size evolves with the iteration count `t >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StepDirection {
    /// `eta0 / sqrt(t + 1)`
    #[default]
    Decreasing,
    /// `eta0 * sqrt(t + 1)`
    Increasing,
}

impl StepDirection {
    pub fn step(self, eta0: f64, t: usize) -> f64 {
        let r = math::sqrt(t as f64 + 1.0);
        match self {
            StepDirection::Decreasing => eta0 / r,
            StepDirection::Increasing => eta0 * r,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepDirection::Decreasing => "decreasing",
            StepDirection::Increasing => "increasing",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "decreasing" => Some(StepDirection::Decreasing),
            "increasing" => Some(StepDirection::Increasing),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TatonnementRun {
    /// Prices at every recorded iteration, starting with the initial ones.
    pub prices: Vec<Vec<f64>>,
    /// Exploitability of the prices with every buyer at its demand.
    pub trajectory: Trajectory,
    /// Whether the run stopped early because prices blew up.
    pub diverged: bool,
}

impl TatonnementRun {
    pub fn final_prices(&self) -> &[f64] {
        self.prices.last().expect("run records the initial prices")
    }

    pub fn final_exploitability(&self) -> f64 {
        self.trajectory.last().expect("run records the initial point").exploitability
    }
}

/// Tâtonnement from uniform prices.
pub fn tatonnement(
    economy: &ExchangeEconomy,
    eta0: f64,
    iters: usize,
    direction: StepDirection,
) -> Result<TatonnementRun> {
    let m = economy.m_goods();
    tatonnement_from(economy, &alloc::vec![1.0 / m as f64; m], eta0, iters, direction)
}

/// Runs `p <- floor(p + eta_t z(p))` for `iters` steps, where `z` is the
/// excess demand and `floor` is [`floor_prices`]. Records `iters + 1` points unless the prices diverge.
pub fn tatonnement_from(
    economy: &ExchangeEconomy,
    start: &[f64],
    eta0: f64,
    iters: usize,
    direction: StepDirection,
) -> Result<TatonnementRun> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::invalid(format!("learning rate {} must be positive", eta0)));
    }
    if start.len() != economy.m_goods() {
        return Err(Error::shape(format!("{} start prices for {} goods", start.len(), economy.m_goods())));
    }
    if start.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("start prices must be finite and nonnegative"));
    }
    let game = ExchangeGame::new(economy.clone());
    let mut p = floor_prices(start);
    let mut prices = Vec::with_capacity(iters + 1);
    let mut trajectory = Trajectory::new();
    let mut diverged = false;
    for t in 0..=iters {
        let mut profile = economy.demands(&p)?;
        profile.extend_from_slice(&p);
        let phi = pseudogame::exploitability(&game, &profile)?.value;
        trajectory.push(TrajectoryPoint { iteration: t, snapshot: t, exploitability: phi, cumulative_regret: phi, wall_ms: 0.0 })?;
        prices.push(p.clone());
        if t == iters {
            break;
        }
        let z = economy.excess_demand(&p)?;
        let eta = direction.step(eta0, t);
        let next: Vec<f64> = p.iter().zip(&z).map(|(pj, zj)| pj + eta * zj).collect();
        if next.iter().any(|x| !x.is_finite()) || math::norm2(&next) > DIVERGENCE_NORM {
            diverged = true;
            break;
        }
        p = floor_prices(&next);
    }
    Ok(TatonnementRun { prices, trajectory, diverged })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaSelection {
    pub eta: f64,
    /// Mean final exploitability for every grid point, in grid order.
    pub means: Vec<(f64, f64)>,
    /// Number of divergent runs per grid point, in grid order.
    pub diverged: Vec<usize>,
}

impl EtaSelection {
    /// Whether every run at every grid point diverged.
    pub fn all_diverged(&self, runs: usize) -> bool {
        self.diverged.iter().all(|&d| d == runs)
    }
}

/// Picks the grid point with the fewest divergent runs over `economies`,
/// then the lowest mean final exploitability (first on ties). Divergent runs
/// contribute their last recorded value.
pub fn select_eta(
    economies: &[ExchangeEconomy],
    grid: &[f64],
    iters: usize,
    direction: StepDirection,
) -> Result<EtaSelection> {
    if economies.is_empty() || grid.is_empty() {
        return Err(Error::invalid("learning-rate selection needs economies and grid points"));
    }
    let mut means = Vec::with_capacity(grid.len());
    let mut diverged = Vec::with_capacity(grid.len());
    for &eta in grid {
        let mut total = 0.0;
        let mut bad = 0;
        for e in economies {
            let run = tatonnement(e, eta, iters, direction)?;
            total += run.final_exploitability();
            bad += run.diverged as usize;
        }
        means.push((eta, total / economies.len() as f64));
        diverged.push(bad);
    }
    let better = |k: usize, b: usize| diverged[k] < diverged[b] || (diverged[k] == diverged[b] && means[k].1 < means[b].1);
    let best = (0..means.len()).fold(0, |b, k| if better(k, b) { k } else { b });
    Ok(EtaSelection { eta: means[best].0, means, diverged })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentRun {
    pub profile: Vec<f64>,
    pub trajectory: Trajectory,
    /// Iterations whose gradient was not finite; no step was taken there.
    pub skipped: Vec<usize>,
}

/// Gradient of `a -> sum_i u_i(b_i, a_-i) - u_i(a)` with the deviations
/// `best_responses` held fixed, by central differences.
pub fn envelope_gradient<G: PseudoGame + ?Sized>(game: &G, a: &[f64], best_responses: &[Vec<f64>]) -> Vec<f64> {
    let f = |x: &[f64]| -> f64 {
        (0..game.n_players())
            .map(|i| {
                let dev = pseudogame::substitute(game, x, i, &best_responses[i]);
                game.payoff(&dev, i) - game.payoff(x, i)
            })
            .sum()
    };
    let mut x = a.to_vec();
    (0..a.len())
        .map(|k| {
            let h = 1e-6 * (1.0 + x[k].abs());
            let orig = x[k];
            x[k] = orig + h;
            let up = f(&x);
            x[k] = orig - h;
            let down = f(&x);
            x[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Projected descent `a <- P(a - eta0 / sqrt(t + 1) grad phi(a))` using the
/// game's exploitability gradient, or the envelope gradient at the attained
/// best responses when the game has none.
pub fn exploitability_descent<G: PseudoGame + ?Sized>(game: &G, start: &[f64], eta0: f64, iters: usize) -> Result<DescentRun> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::invalid(format!("learning rate {} must be positive", eta0)));
    }
    let mut a = game.project(start);
    let mut trajectory = Trajectory::new();
    let mut skipped = Vec::new();
    for t in 0..=iters {
        let e = pseudogame::exploitability(game, &a)?;
        trajectory.push(TrajectoryPoint {
            iteration: t,
            snapshot: t,
            exploitability: e.value,
            cumulative_regret: e.value,
            wall_ms: 0.0,
        })?;
        if t == iters {
            break;
        }
        let g = game
            .exploitability_gradient(&a)
            .unwrap_or_else(|| envelope_gradient(game, &a, &e.best_responses));
        if g.iter().any(|x| !x.is_finite()) {
            skipped.push(t);
            continue;
        }
        let eta = StepDirection::Decreasing.step(eta0, t);
        let y: Vec<f64> = a.iter().zip(&g).map(|(x, gx)| x - eta * gx).collect();
        a = game.project(&y);
    }
    Ok(DescentRun { profile: a, trajectory, skipped })
}
