use alloc::vec;
use alloc::vec::Vec;

use super::PseudoGame;
use crate::math;

/// Two players on `[0, 1]^2` with `u_i(a) = a_i`, `g_1(a) = a_2 - a_1^2` and
/// `g_2(a) = a_1 - a_2^2`. The best response is `sqrt(a_-i)`, so the
/// exploitability `sqrt(a_1) + sqrt(a_2) - a_1 - a_2` has unbounded slope
/// near the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NonLipschitzGame;

const CENTER: [f64; 2] = [0.5, 0.5];

impl NonLipschitzGame {
    pub fn new() -> Self {
        NonLipschitzGame
    }

    /// Closed-form exploitability.
    pub fn closed_form(a: &[f64]) -> f64 {
        math::sqrt(a[0]) + math::sqrt(a[1]) - a[0] - a[1]
    }

    fn feasible(a: &[f64]) -> bool {
        a.iter().all(|&v| (0.0..=1.0).contains(&v)) && a[1] >= a[0] * a[0] && a[0] >= a[1] * a[1]
    }
}

impl PseudoGame for NonLipschitzGame {
    fn action_dims(&self) -> Vec<usize> {
        vec![1, 1]
    }

    fn payoff(&self, profile: &[f64], player: usize) -> f64 {
        profile[player]
    }

    fn constraints(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let (own, other) = (profile[player], profile[1 - player]);
        vec![other - own * own]
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 2]
    }

    /// Feasible points are returned unchanged. Others are clamped to the box
    /// and then moved along the segment toward `(1/2, 1/2)`, an interior
    /// point, until they reach the boundary.
    fn project(&self, profile: &[f64]) -> Vec<f64> {
        let clamped: Vec<f64> = profile.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        if Self::feasible(&clamped) {
            return clamped;
        }
        let at = |t: f64| -> Vec<f64> {
            clamped.iter().zip(CENTER).map(|(&p, c)| c + t * (p - c)).collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if Self::feasible(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(lo)
    }

    fn best_response(&self, player: usize, profile: &[f64]) -> Option<Vec<f64>> {
        Some(vec![math::sqrt(profile[1 - player].max(0.0))])
    }

    /// `1/(2 sqrt(a_i)) - 1`; infinite at `a_i = 0`.
    fn exploitability_gradient(&self, profile: &[f64]) -> Option<Vec<f64>> {
        Some(profile.iter().map(|&v| 0.5 / math::sqrt(v) - 1.0).collect())
    }
}
