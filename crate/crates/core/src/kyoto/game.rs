use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::polytope::{centroid, enumerate_vertices, Halfspaces, HitAndRun};
use super::{
    cap_slack, country_payoff_with, flat_to_profile, joint_halfspaces, own_target, profile_to_flat, transfer_slack,
    DamageForm, KyotoAction, KyotoInstance,
};
use crate::linalg;
use crate::math;
use crate::pseudogame::{self, DeviationMode, PseudoGame, FEASIBILITY_TOL};
use crate::rng::{self, SeededRng};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result};

const HIT_AND_RUN_STEPS: usize = 200;

/// Step of the projected fixed-point iteration; below `mu / L^2` for the
/// game map, whose symmetric part has least eigenvalue 1/2 and whose norm is
/// at most the golden ratio.
const VE_STEP: f64 = 0.19;

/// The Kyoto pseudo-game over the profile layout, with the jointly feasible
/// polytope stored by its vertices.
#[derive(Clone, Debug)]
pub struct KyotoGame {
    inst: KyotoInstance,
    mode: DeviationMode,
    damage: DamageForm,
    box_cap: f64,
    halfspaces: Halfspaces,
    vertices: Vec<Vec<f64>>,
    box_active: bool,
    interior: Option<Vec<f64>>,
}

impl KyotoGame {
    pub fn new(inst: KyotoInstance, mode: DeviationMode, damage: DamageForm) -> Result<Self> {
        let box_cap = inst.box_cap();
        let poly = enumerate_vertices(&joint_halfspaces(&inst), box_cap)?;
        if poly.vertices.is_empty() {
            return Err(Error::invalid("jointly feasible set has no vertices"));
        }
        let n = inst.n();
        let c = centroid(&poly.vertices);
        let margin = poly.halfspaces.slack(&c).into_iter().fold(f64::INFINITY, f64::min);
        let interior = if margin > 1e-9 * box_cap { Some(c) } else { None };
        let vertices = poly.vertices.iter().map(|v| flat_to_profile(n, v)).collect();
        Ok(KyotoGame {
            inst,
            mode,
            damage,
            box_cap,
            halfspaces: poly.halfspaces,
            vertices,
            box_active: poly.box_active,
            interior,
        })
    }

    pub fn instance(&self) -> &KyotoInstance {
        &self.inst
    }

    pub fn mode(&self) -> DeviationMode {
        self.mode
    }

    /// The same game with another deviation mode.
    pub fn with_mode(&self, mode: DeviationMode) -> Self {
        KyotoGame { mode, ..self.clone() }
    }

    pub fn damage(&self) -> DamageForm {
        self.damage
    }

    pub fn box_cap(&self) -> f64 {
        self.box_cap
    }

    /// Whether the box `x <= box_cap` cuts the jointly feasible set.
    pub fn box_active(&self) -> bool {
        self.box_active
    }

    /// Vertices of the jointly feasible set in the profile layout.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Vertices in the flat layout.
    pub fn vertices_flat(&self) -> Vec<Vec<f64>> {
        let n = self.inst.n();
        self.vertices.iter().map(|v| profile_to_flat(n, v)).collect()
    }

    /// `rows x dim` vertex matrix in the profile layout, padded with the zero
    /// action (itself a vertex), so every convex combination of its rows is
    /// jointly feasible.
    pub fn vertex_matrix(&self, rows: usize) -> Result<Tensor> {
        if rows < self.vertices.len() {
            return Err(Error::shape(format!("{} rows cannot hold {} vertices", rows, self.vertices.len())));
        }
        let dim = self.inst.dim();
        let mut data = Vec::with_capacity(rows * dim);
        for v in &self.vertices {
            data.extend_from_slice(v);
        }
        data.resize(rows * dim, 0.0);
        Tensor::matrix(rows, dim, data)
    }

    /// Every country's target `c_i(a_-i)`, concatenated in the profile layout.
    pub fn targets(&self, profile: &[f64]) -> Vec<f64> {
        (0..self.inst.n()).flat_map(|i| own_target(&self.inst, i, profile, self.damage)).collect()
    }

    /// Euclidean projection onto the jointly feasible set.
    pub fn project_exact(&self, profile: &[f64]) -> Vec<f64> {
        linalg::project_onto_hull(&self.vertices, profile).point
    }

    fn block_range(&self, i: usize) -> core::ops::Range<usize> {
        let w = self.inst.n() + 1;
        i * w..(i + 1) * w
    }

    /// `a_i - c_i(a_-i)` for every country: the negated own-payoff gradients.
    pub fn game_map(&self, profile: &[f64]) -> Vec<f64> {
        profile.iter().zip(self.targets(profile)).map(|(a, c)| a - c).collect()
    }

    fn individual_best_response(&self, player: usize, profile: &[f64]) -> Option<Vec<f64>> {
        let n = self.inst.n();
        let flat = profile_to_flat(n, profile);
        let mut free = vec![player];
        free.extend((0..n).map(|j| n + player * n + j));
        let slice = self.halfspaces.slice(&free, &flat);
        let poly = enumerate_vertices(&slice, self.box_cap).ok()?;
        if poly.vertices.is_empty() {
            return None;
        }
        let c = own_target(&self.inst, player, profile, self.damage);
        Some(linalg::project_onto_hull(&poly.vertices, &c).point)
    }
}

impl PseudoGame for KyotoGame {
    fn action_dims(&self) -> Vec<usize> {
        vec![self.inst.n() + 1; self.inst.n()]
    }

    fn payoff(&self, profile: &[f64], player: usize) -> f64 {
        country_payoff_with(&self.inst, player, &KyotoAction::from_profile(self.inst.n(), profile), self.damage)
    }

    /// Own emission-cap slack followed by every transfer-balance slack.
    fn constraints(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let n = self.inst.n();
        let act = KyotoAction::from_profile(n, profile);
        let mut g = Vec::with_capacity(n + 1);
        g.push(cap_slack(&self.inst, player, &act));
        g.extend((0..n).map(|j| transfer_slack(&self.inst, j, &act)));
        g
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.box_cap); self.inst.dim()]
    }

    fn project(&self, profile: &[f64]) -> Vec<f64> {
        if pseudogame::jointly_feasible(self, profile) {
            return profile.to_vec();
        }
        self.project_exact(profile)
    }

    fn best_response(&self, player: usize, profile: &[f64]) -> Option<Vec<f64>> {
        match self.mode {
            DeviationMode::Individual => self.individual_best_response(player, profile),
            DeviationMode::Joint => self.joint_deviation(profile).map(|b| b[self.block_range(player)].to_vec()),
        }
    }

    fn deviation_mode(&self) -> DeviationMode {
        self.mode
    }

    /// The projection of the stacked targets onto the jointly feasible set.
    fn joint_deviation(&self, profile: &[f64]) -> Option<Vec<f64>> {
        Some(self.project_exact(&self.targets(profile)))
    }

    /// Hit-and-run from the vertex centroid, or a random convex combination
    /// of vertices when the feasible set has an empty interior.
    fn sample_feasible(&self, rng: &mut SeededRng) -> Option<Vec<f64>> {
        let n = self.inst.n();
        match &self.interior {
            Some(start) => {
                let chain = HitAndRun::new(self.halfspaces.clone(), start.clone(), HIT_AND_RUN_STEPS);
                Some(flat_to_profile(n, &chain.sample(rng)))
            }
            None => {
                let w = rng::simplex(rng, self.vertices.len());
                let mut x = vec![0.0; self.inst.dim()];
                for (wk, v) in w.iter().zip(&self.vertices) {
                    for (xk, vk) in x.iter_mut().zip(v) {
                        *xk += wk * vk;
                    }
                }
                Some(x)
            }
        }
    }

    fn own_payoff_gradient(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let c = own_target(&self.inst, player, profile, self.damage);
        profile[self.block_range(player)].iter().zip(&c).map(|(a, c)| c - a).collect()
    }

    /// Exact in joint mode, where the deviation set does not move with the
    /// profile; `None` in individual mode.
    fn exploitability_gradient(&self, profile: &[f64]) -> Option<Vec<f64>> {
        if self.mode != DeviationMode::Joint {
            return None;
        }
        let n = self.inst.n();
        let b = self.joint_deviation(profile)?;
        let mut g = self.game_map(profile);
        for i in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                // c_i[1 + k] = ... - I_kk
                let r = self.block_range(i).start + 1 + k;
                g[self.block_range(k).start + 1 + k] -= b[r] - profile[r];
            }
        }
        Some(g)
    }
}

/// Per-country regrets `|a_i - c_i(a)|^2 / 2 - |b_i - c_i(a)|^2 / 2` of the
/// deviation profile `b` against `a`, both of shape `[dim]` in the profile
/// layout.
pub fn regret_var(tape: &mut Tape, game: &KyotoGame, a: Var, b: Var) -> Vec<Var> {
    let n = game.inst.n();
    let w = n + 1;
    let dim = game.inst.dim();
    (0..n)
        .map(|i| {
            let zero = vec![0.0; dim];
            let bias = own_target(&game.inst, i, &zero, game.damage);
            let mut weights = vec![0.0; w * dim];
            for k in (0..n).filter(|&k| k != i) {
                weights[(1 + k) * dim + k * w + 1 + k] = -1.0;
            }
            let weights = tape.leaf(Tensor::matrix(w, dim, weights).expect("target map shape"));
            let bias = tape.vector(bias);
            let c = tape.linear(a, weights, bias);
            let a_i = tape.slice_last(a, i * w, w);
            let b_i = tape.slice_last(b, i * w, w);
            let da = tape.sub(a_i, c);
            let db = tape.sub(b_i, c);
            let qa = tape.dot(da, da);
            let qb = tape.dot(db, db);
            let r = tape.sub(qa, qb);
            tape.mul_scalar(r, 0.5)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VeSolution {
    pub profile: Vec<f64>,
    /// Joint-mode exploitability at `profile`.
    pub exploitability: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Variational equilibrium by the projected fixed-point iteration
/// `x <- P_X(x - tau F(x))` with `F = a - c(a)`, started from the best of the
/// vertices and their centroid. Stops once a step moves less than `tol`.
pub fn variational_equilibrium(game: &KyotoGame, tol: f64, max_iter: usize) -> Result<VeSolution> {
    let joint = game.with_mode(DeviationMode::Joint);
    let score = |x: &[f64]| pseudogame::exploitability(&joint, x).map(|e| e.value);
    let mut x = centroid(&joint.vertices);
    let mut best = score(&x)?;
    for v in &joint.vertices {
        let s = score(v)?;
        if s < best {
            best = s;
            x = v.clone();
        }
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let f = joint.game_map(&x);
        let y: Vec<f64> = x.iter().zip(&f).map(|(xi, fi)| xi - VE_STEP * fi).collect();
        let next = joint.project_exact(&y);
        let step = math::dist2(&next, &x);
        x = next;
        if step <= tol {
            converged = true;
            break;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("equilibrium iterate".into()));
    }
    let exploitability = score(&x)?;
    Ok(VeSolution { profile: x, exploitability, iterations, converged })
}

/// Whether `profile` satisfies every constraint of `game` within the
/// feasibility tolerance.
pub fn is_jointly_feasible(game: &KyotoGame, profile: &[f64]) -> bool {
    game.halfspaces.violation(&profile_to_flat(game.inst.n(), profile)) <= -FEASIBILITY_TOL * game.box_cap
}
