use alloc::vec;
use alloc::vec::Vec;

use super::diff::{exploitability_var, OracleGrad};
use super::{uniform_feasible_outcome_with, ExchangeEconomy, PRICE_FLOOR};
use crate::linalg;
use crate::math;
use crate::pseudogame::PseudoGame;
use crate::rng::SeededRng;
use crate::tape::Tape;

/// An exchange economy as an `(n + 1)`-player pseudo-game. Players `0..n`
/// are buyers choosing allocation rows subject to their budget; player `n`
/// is the seller choosing prices on the simplex. Profiles are the
/// allocation rows followed by the prices.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeGame {
    economy: ExchangeEconomy,
}

impl ExchangeGame {
    pub fn new(economy: ExchangeEconomy) -> Self {
        ExchangeGame { economy }
    }

    pub fn economy(&self) -> &ExchangeEconomy {
        &self.economy
    }

    fn split<'a>(&self, profile: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        profile.split_at(self.economy.n_buyers() * self.economy.m_goods())
    }

    /// Aggregate allocation minus aggregate endowment.
    pub fn excess_allocation(&self, profile: &[f64]) -> Vec<f64> {
        let (x, _) = self.split(profile);
        let (n, m) = (self.economy.n_buyers(), self.economy.m_goods());
        let mut z: Vec<f64> = self.economy.supply().iter().map(|s| -s).collect();
        for i in 0..n {
            for j in 0..m {
                z[j] += x[i * m + j];
            }
        }
        z
    }
}

impl PseudoGame for ExchangeGame {
    fn action_dims(&self) -> Vec<usize> {
        vec![self.economy.m_goods(); self.economy.n_buyers() + 1]
    }

    fn payoff(&self, profile: &[f64], player: usize) -> f64 {
        let (x, p) = self.split(profile);
        let m = self.economy.m_goods();
        if player < self.economy.n_buyers() {
            self.economy.utility(player, &x[player * m..(player + 1) * m])
        } else {
            math::dot(p, &self.excess_allocation(profile))
        }
    }

    /// Buyers: `[E_i . p - X_i . p]`. Seller: `[sum p - 1, 1 - sum p]`.
    fn constraints(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let (x, p) = self.split(profile);
        let m = self.economy.m_goods();
        if player < self.economy.n_buyers() {
            vec![self.economy.budget(player, p) - math::dot(&x[player * m..(player + 1) * m], p)]
        } else {
            let s: f64 = p.iter().sum();
            vec![s - 1.0, 1.0 - s]
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let (n, m) = (self.economy.n_buyers(), self.economy.m_goods());
        let mut b = vec![(0.0, f64::INFINITY); n * m];
        b.extend(core::iter::repeat((0.0, 1.0)).take(m));
        b
    }

    /// Prices go to the simplex; each allocation row goes to the budget set
    /// at the projected prices (floored for the projection).
    fn project(&self, profile: &[f64]) -> Vec<f64> {
        let (x, p) = self.split(profile);
        let m = self.economy.m_goods();
        let p = linalg::project_simplex(p);
        let floored: Vec<f64> = p.iter().map(|q| q.max(PRICE_FLOOR)).collect();
        let mut out = Vec::with_capacity(profile.len());
        for i in 0..self.economy.n_buyers() {
            let budget = self.economy.budget(i, &p);
            out.extend(linalg::project_budget_set(&x[i * m..(i + 1) * m], &floored, budget));
        }
        out.extend(p);
        out
    }

    /// Buyers: demand at floored prices with the budget at actual prices.
    /// Seller: the good with the largest excess allocation, lowest index on
    /// ties.
    fn best_response(&self, player: usize, profile: &[f64]) -> Option<Vec<f64>> {
        let (_, p) = self.split(profile);
        if player < self.economy.n_buyers() {
            let floored: Vec<f64> = p.iter().map(|q| q.max(PRICE_FLOOR)).collect();
            let budget = self.economy.budget(player, p).max(0.0);
            self.economy.demand(player, &floored, budget).ok()
        } else {
            let z = self.excess_allocation(profile);
            let mut br = vec![0.0; z.len()];
            br[math::argmax(&z)] = 1.0;
            Some(br)
        }
    }

    fn sample_feasible(&self, rng: &mut SeededRng) -> Option<Vec<f64>> {
        Some(uniform_feasible_outcome_with(&self.economy, rng).to_profile())
    }

    /// Gradient of the exploitability with best responses differentiated
    /// through the closed-form demands. At kinks (Linear choices, Leontief
    /// minima, seller ties) this is the gradient of the active piece.
    fn exploitability_gradient(&self, profile: &[f64]) -> Option<Vec<f64>> {
        let (x, p) = self.split(profile);
        let mut tape = Tape::new();
        let xv = tape.vector(x.to_vec());
        let pv = tape.vector(p.to_vec());
        let phi = exploitability_var(&mut tape, &self.economy, xv, pv, OracleGrad::Pathwise);
        let grads = tape.backward_scalar(phi).ok()?;
        let mut g = grads.wrt(xv).into_data();
        g.extend(grads.wrt(pv).into_data());
        Some(g)
    }
}
