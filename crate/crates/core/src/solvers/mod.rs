//! Equilibrium solvers: tâtonnement and exploitability descent baselines and
//! generative-adversarial training of equilibrium generators.

mod baselines;
mod gaes;
mod problem;

pub use baselines::{
    envelope_gradient, exploitability_descent, select_eta, tatonnement, tatonnement_from, DescentRun, EtaSelection,
    StepDirection, TatonnementRun, DIVERGENCE_NORM, ETA_GRID,
};
pub use gaes::{
    discriminate, discriminator_forward_exchange, eval_generalization_gap, evaluate, gaes_resume, gaes_train,
    gaes_train_kyoto, generate, generator_forward_exchange, BestSnapshot, Discriminator, GaesModel, GapReport,
    GradMode, Schedule, StopReason, TrainConfig, TrainOutcome, TrainState, HIDDEN,
};
pub use problem::{ExchangeProblem, GaesProblem, KyotoProblem};

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Outer learning rate `1 / sqrt(t)` for `t >= 1`.
pub fn theorem1_gen_lr(t: u64) -> f64 {
    math::recip_sqrt(t as f64)
}

/// Inner learning rate `(2s + 1) / (pl (s + 1)^2)` for `s >= 1`, where `pl`
/// is twice the product of the smallest singular value and the
/// Polyak-Lojasiewicz constant.
pub fn theorem1_disc_lr(s: u64, pl: f64) -> f64 {
    let s = s as f64;
    (2.0 * s + 1.0) / (pl * (s + 1.0) * (s + 1.0))
}

/// Source of wall-clock time in milliseconds.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// Identifier of the profile or weights this point was measured on.
    pub snapshot: usize,
    pub exploitability: f64,
    pub cumulative_regret: f64,
    pub wall_ms: f64,
}

/// Points with strictly increasing iterations and finite metrics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory { points: Vec::new() }
    }

    pub fn push(&mut self, point: TrajectoryPoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if point.iteration <= last.iteration {
                return Err(Error::invalid(format!(
                    "trajectory iteration {} does not follow {}",
                    point.iteration, last.iteration
                )));
            }
        }
        if !(point.exploitability.is_finite() && point.cumulative_regret.is_finite() && point.wall_ms.is_finite()) {
            return Err(Error::NonFinite(format!("trajectory metric at iteration {}", point.iteration)));
        }
        self.points.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    /// The same points without timing, for reproducibility comparisons.
    pub fn without_time(&self) -> Trajectory {
        Trajectory { points: self.points.iter().map(|p| TrajectoryPoint { wall_ms: 0.0, ..*p }).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_at_small_indices() {
        assert_eq!(theorem1_gen_lr(1), 1.0);
        assert_eq!(theorem1_gen_lr(4), 0.5);
        assert_eq!(theorem1_disc_lr(1, 1.0), 0.75);
        assert_eq!(theorem1_disc_lr(2, 2.0), 5.0 / 18.0);
    }

    #[test]
    fn trajectory_rejects_disorder_and_nan() {
        let p = |iteration, e| TrajectoryPoint { iteration, snapshot: 0, exploitability: e, cumulative_regret: 0.0, wall_ms: 0.0 };
        let mut t = Trajectory::new();
        t.push(p(1, 1.0)).unwrap();
        assert!(t.push(p(1, 1.0)).is_err());
        assert!(t.push(p(2, f64::NAN)).is_err());
        t.push(p(3, 0.5)).unwrap();
        assert_eq!(t.len(), 2);
    }
}
