use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::PseudoGame;
use crate::linalg;
use crate::math;
use crate::rng::{self, SeededRng};
use crate::{Error, Result};

/// Two-player normal-form game in mixed strategies. The row player gets
/// `x^T A y`, the column player `x^T B y`. Each player's only constraint is
/// membership of its own simplex, so deviations never depend on the opponent.
#[derive(Clone, Debug, PartialEq)]
pub struct BimatrixGame {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BimatrixGame {
    /// `a` and `b` are row-major `rows x cols` payoff matrices.
    pub fn new(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let rows = a.len();
        if rows == 0 || b.len() != rows {
            return Err(Error::shape(format!("payoff matrices have {} and {} rows", rows, b.len())));
        }
        let cols = a[0].len();
        if cols == 0 || a.iter().chain(b).any(|r| r.len() != cols) {
            return Err(Error::shape("payoff matrix rows differ in length"));
        }
        let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<_>>();
        let (a, b) = (flat(a), flat(b));
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("payoff entry".into()));
        }
        Ok(BimatrixGame { rows, cols, a, b })
    }

    /// Row player wins 1 on a mismatch, column player wins 1 on a match.
    pub fn matching_pennies() -> Self {
        let a = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let b = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        Self::new(&a, &b).expect("fixed shape")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Expected payoff of every pure strategy of `player` against the
    /// opponent's mixed strategy in `profile`.
    pub fn pure_payoffs(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let (x, y) = profile.split_at(self.rows);
        if player == 0 {
            (0..self.rows)
                .map(|r| (0..self.cols).map(|c| self.a[r * self.cols + c] * y[c]).sum())
                .collect()
        } else {
            (0..self.cols)
                .map(|c| (0..self.rows).map(|r| self.b[r * self.cols + c] * x[r]).sum())
                .collect()
        }
    }
}

impl PseudoGame for BimatrixGame {
    fn action_dims(&self) -> Vec<usize> {
        vec![self.rows, self.cols]
    }

    fn payoff(&self, profile: &[f64], player: usize) -> f64 {
        let own = if player == 0 { &profile[..self.rows] } else { &profile[self.rows..] };
        math::dot(own, &self.pure_payoffs(profile, player))
    }

    /// Nonnegativity of every weight, then `sum - 1 >= 0` and `1 - sum >= 0`.
    fn constraints(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let own = if player == 0 { &profile[..self.rows] } else { &profile[self.rows..] };
        let s: f64 = own.iter().sum();
        let mut g = own.to_vec();
        g.push(s - 1.0);
        g.push(1.0 - s);
        g
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.rows + self.cols]
    }

    fn project(&self, profile: &[f64]) -> Vec<f64> {
        let mut out = linalg::project_simplex(&profile[..self.rows]);
        out.extend(linalg::project_simplex(&profile[self.rows..]));
        out
    }

    /// Pure strategy with the highest expected payoff, lowest index on ties.
    fn best_response(&self, player: usize, profile: &[f64]) -> Option<Vec<f64>> {
        let payoffs = self.pure_payoffs(profile, player);
        let mut br = vec![0.0; payoffs.len()];
        br[math::argmax(&payoffs)] = 1.0;
        Some(br)
    }

    fn sample_feasible(&self, rng: &mut SeededRng) -> Option<Vec<f64>> {
        let mut out = rng::simplex(rng, self.rows);
        out.extend(rng::simplex(rng, self.cols));
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudogame::{exploitability, regret};

    #[test]
    fn dominant_row_is_best_response() {
        let g = BimatrixGame::new(&[vec![1.0, 1.0], vec![0.0, 0.0]], &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        for y in [[1.0, 0.0], [0.0, 1.0], [0.3, 0.7]] {
            let a = [0.5, 0.5, y[0], y[1]];
            assert_eq!(g.best_response(0, &a).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn matching_pennies_regret_and_exploitability() {
        let g = BimatrixGame::matching_pennies();
        let a = [1.0, 0.0, 1.0, 0.0];
        let b = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(regret(&g, 0, &a, &b).unwrap(), 2.0);
        assert_eq!(exploitability(&g, &a).unwrap().value, 2.0);
        assert!(exploitability(&g, &[0.5, 0.5, 0.5, 0.5]).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        assert!(BimatrixGame::new(&[vec![1.0, 2.0], vec![1.0]], &[vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(BimatrixGame::new(&[vec![1.0]], &[vec![0.0], vec![0.0]]).is_err());
    }
}
