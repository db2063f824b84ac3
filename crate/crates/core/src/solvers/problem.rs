use alloc::vec;
use alloc::vec::Vec;

use super::GradMode;
use crate::exchange::{cumulative_regret_var, exploitability_var, ExchangeEconomy, ExchangeGame, OracleGrad, PRICE_FLOOR};
use crate::kyoto::{regret_var, KyotoGame, PARAM_RANGE};
use crate::math;
use crate::pseudogame::{self, DeviationMode, PseudoGame};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// A pseudo-game together with the feasibility heads that turn raw network
/// outputs into feasible profiles and deviations.
pub trait GaesProblem {
    /// Generator input.
    fn features(&self) -> Vec<f64>;

    fn profile_dim(&self) -> usize;

    /// Width of the raw generator output consumed by [`Self::generator_head`].
    fn generator_outputs(&self) -> usize;

    /// Maps raw generator outputs to a jointly feasible profile.
    fn generator_head(&self, tape: &mut Tape, raw: Var) -> Var;

    /// Width of the raw discriminator output.
    fn discriminator_outputs(&self) -> usize;

    /// Discriminator input for the profile `profile`.
    fn discriminator_input(&self, tape: &mut Tape, profile: Var) -> Var;

    /// Maps raw discriminator outputs to a feasible deviation profile.
    fn discriminator_head(&self, tape: &mut Tape, raw: Var, profile: Var) -> Var;

    /// Cumulative regret of the exact best responses, i.e. the exploitability.
    fn exact_cumulative_regret(&self, tape: &mut Tape, profile: Var, mode: GradMode) -> Var;

    /// Cumulative regret of `deviation` against `profile`.
    fn cumulative_regret(&self, tape: &mut Tape, profile: Var, deviation: Var) -> Var;

    fn game(&self) -> &dyn PseudoGame;

    fn exploitability(&self, profile: &[f64]) -> Result<f64> {
        pseudogame::exploitability(self.game(), profile).map(|e| e.value)
    }

    /// A jointly feasible profile from the game's sampler.
    fn sample_profile(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        self.game()
            .sample_feasible(rng)
            .ok_or_else(|| Error::invalid("game sampler found no feasible profile"))
    }
}

fn constant(tape: &mut Tape, xs: Vec<f64>) -> Var {
    tape.leaf(Tensor::vector(xs))
}

/// An exchange economy with price and budget-share heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeProblem {
    game: ExchangeGame,
}

impl ExchangeProblem {
    pub fn new(economy: ExchangeEconomy) -> Self {
        ExchangeProblem { game: ExchangeGame::new(economy) }
    }

    pub fn economy(&self) -> &ExchangeEconomy {
        self.game.economy()
    }

    /// Allocation rows spending every budget at the prices `p` (`[m]`) in
    /// the proportions given by the row-wise softmax of `logits` (`[n * m]`).
    fn spend(&self, tape: &mut Tape, logits: Var, p: Var) -> Vec<Var> {
        let e = self.economy();
        let m = e.m_goods();
        let pf = tape.clamp_min(p, PRICE_FLOOR);
        (0..e.n_buyers())
            .map(|i| {
                let l = tape.slice_last(logits, i * m, m);
                let s = tape.softmax(l);
                let ec = constant(tape, e.e_row(i).to_vec());
                let budget = tape.dot(ec, p);
                let spend = tape.mul(s, budget);
                tape.div(spend, pf)
            })
            .collect()
    }
}

impl GaesProblem for ExchangeProblem {
    /// `(V, E, rho)` flattened.
    fn features(&self) -> Vec<f64> {
        self.economy().features()
    }

    fn profile_dim(&self) -> usize {
        let e = self.economy();
        (e.n_buyers() + 1) * e.m_goods()
    }

    /// Price logits followed by per-buyer budget-share logits.
    fn generator_outputs(&self) -> usize {
        self.profile_dim()
    }

    fn generator_head(&self, tape: &mut Tape, raw: Var) -> Var {
        let (n, m) = (self.economy().n_buyers(), self.economy().m_goods());
        let lp = tape.slice_last(raw, 0, m);
        let p = tape.softmax(lp);
        let shares = tape.slice_last(raw, m, n * m);
        let mut parts = self.spend(tape, shares, p);
        parts.push(p);
        tape.concat_last(&parts)
    }

    /// Budget-share logits per buyer.
    fn discriminator_outputs(&self) -> usize {
        self.economy().n_buyers() * self.economy().m_goods()
    }

    fn discriminator_input(&self, tape: &mut Tape, profile: Var) -> Var {
        let f = constant(tape, self.features());
        tape.concat_last(&[f, profile])
    }

    /// Buyers spend their budgets at the generated prices; the seller puts
    /// all weight on the good in largest excess allocation.
    fn discriminator_head(&self, tape: &mut Tape, raw: Var, profile: Var) -> Var {
        let (n, m) = (self.economy().n_buyers(), self.economy().m_goods());
        let p = tape.slice_last(profile, n * m, m);
        let mut parts = self.spend(tape, raw, p);
        let z = self.game.excess_allocation(tape.value(profile).data());
        let mut q = vec![0.0; m];
        q[math::argmax(&z)] = 1.0;
        parts.push(constant(tape, q));
        tape.concat_last(&parts)
    }

    fn exact_cumulative_regret(&self, tape: &mut Tape, profile: Var, mode: GradMode) -> Var {
        let (n, m) = (self.economy().n_buyers(), self.economy().m_goods());
        let x = tape.slice_last(profile, 0, n * m);
        let p = tape.slice_last(profile, n * m, m);
        let oracle = match mode {
            GradMode::Pathwise => OracleGrad::Pathwise,
            GradMode::StopGradient => OracleGrad::Detached,
        };
        exploitability_var(tape, self.economy(), x, p, oracle)
    }

    fn cumulative_regret(&self, tape: &mut Tape, profile: Var, deviation: Var) -> Var {
        cumulative_regret_var(tape, self.economy(), profile, deviation)
    }

    fn game(&self) -> &dyn PseudoGame {
        &self.game
    }
}

/// A Kyoto game in joint-deviation mode with vertex-weight heads over a
/// zero-padded vertex matrix.
#[derive(Clone, Debug)]
pub struct KyotoProblem {
    game: KyotoGame,
    vertices: Tensor,
}

impl KyotoProblem {
    /// `rows` is the padded vertex count shared by every problem a model
    /// sees.
    pub fn new(game: &KyotoGame, rows: usize) -> Result<Self> {
        let game = game.with_mode(DeviationMode::Joint);
        let vertices = game.vertex_matrix(rows)?;
        Ok(KyotoProblem { game, vertices })
    }

    pub fn kyoto(&self) -> &KyotoGame {
        &self.game
    }

    pub fn rows(&self) -> usize {
        self.vertices.rows()
    }

    fn combine(&self, tape: &mut Tape, raw: Var) -> Var {
        let rows = self.rows();
        let w = tape.softmax(raw);
        let w = tape.reshape(w, &[1, rows]);
        let v = tape.leaf(self.vertices.clone());
        let x = tape.matmul(w, v);
        tape.reshape(x, &[self.profile_dim()])
    }

    fn total(tape: &mut Tape, parts: Vec<Var>) -> Var {
        let mut it = parts.into_iter();
        let first = it.next().expect("at least one country");
        it.fold(first, |acc, r| tape.add(acc, r))
    }
}

impl GaesProblem for KyotoProblem {
    /// `(rev, dmg, gamma, cap)` scaled by the largest sampled value.
    fn features(&self) -> Vec<f64> {
        self.game.instance().features().into_iter().map(|x| x / PARAM_RANGE.1).collect()
    }

    fn profile_dim(&self) -> usize {
        self.game.instance().dim()
    }

    /// One logit per padded vertex.
    fn generator_outputs(&self) -> usize {
        self.rows()
    }

    fn generator_head(&self, tape: &mut Tape, raw: Var) -> Var {
        self.combine(tape, raw)
    }

    fn discriminator_outputs(&self) -> usize {
        self.rows()
    }

    fn discriminator_input(&self, tape: &mut Tape, profile: Var) -> Var {
        let f = constant(tape, self.features());
        let scaled = tape.mul_scalar(profile, 1.0 / self.game.box_cap());
        tape.concat_last(&[f, scaled])
    }

    fn discriminator_head(&self, tape: &mut Tape, raw: Var, _profile: Var) -> Var {
        self.combine(tape, raw)
    }

    /// The exact deviation enters as a constant in both modes: the joint
    /// feasible set does not move with the profile, so this is already the
    /// exact gradient.
    fn exact_cumulative_regret(&self, tape: &mut Tape, profile: Var, _mode: GradMode) -> Var {
        let b = self
            .game
            .joint_deviation(tape.value(profile).data())
            .expect("joint deviation always exists");
        let bv = constant(tape, b);
        let parts = regret_var(tape, &self.game, profile, bv);
        Self::total(tape, parts)
    }

    fn cumulative_regret(&self, tape: &mut Tape, profile: Var, deviation: Var) -> Var {
        let parts = regret_var(tape, &self.game, profile, deviation);
        Self::total(tape, parts)
    }

    fn game(&self) -> &dyn PseudoGame {
        &self.game
    }
}
