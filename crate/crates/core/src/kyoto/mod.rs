//! The Kyoto joint-implementation game.
//!
//! Country `i` chooses emissions `e_i` and investments `I_ij` in every
//! country `j`. Its payoff is revenue `e_i (beta_i - e_i / 2)` minus the
//! investment cost `(I_ii^2 + sum_{j != i} [(I_ij + I_jj)^2 - I_jj^2]) / 2`
//! minus damage `delta_i * sum_j (e_j - sum_k I_jk)`. Actions must respect
//! the emission caps `e_i - sum_j gamma_j I_ij <= cap_i`, the transfer
//! balances `e_j - gamma_j sum_k I_kj >= 0` and nonnegativity.
//!
//! Two layouts are used. The *profile* layout groups each country's block
//! `(e_i, I_i1, .., I_in)`; the *flat* layout used by halfspaces and vertex
//! lists is `(e_1, .., e_n, I row-major)`.

mod game;
mod polytope;

pub use game::{is_jointly_feasible, regret_var, variational_equilibrium, KyotoGame, VeSolution};
pub use polytope::{centroid, enumerate_vertices, Halfspaces, HitAndRun, PolytopeVertices, DEDUP_TOL, MAX_ENUM_DIM};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng;
use crate::{Error, Result};

/// Range of every sampled parameter.
pub const PARAM_RANGE: (f64, f64) = (0.5, 50.0);

/// Absolute slack below which a constraint counts as binding.
pub const CLASSIFY_TOL: f64 = 1e-4;

/// Which net emissions enter the damage term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DamageForm {
    /// `e_j - sum_k I_jk`
    #[default]
    Plain,
    /// `e_j - gamma_j sum_k I_kj`
    GammaWeighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KyotoInstance {
    pub rev: Vec<f64>,
    pub dmg: Vec<f64>,
    pub gamma: Vec<f64>,
    pub cap: Vec<f64>,
}

impl KyotoInstance {
    pub fn new(rev: Vec<f64>, dmg: Vec<f64>, gamma: Vec<f64>, cap: Vec<f64>) -> Result<Self> {
        let n = rev.len();
        if n == 0 || dmg.len() != n || gamma.len() != n || cap.len() != n {
            return Err(Error::shape(format!(
                "parameter lengths {}, {}, {}, {} must agree and be positive",
                n,
                dmg.len(),
                gamma.len(),
                cap.len()
            )));
        }
        if rev.iter().chain(&dmg).chain(&gamma).chain(&cap).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Kyoto parameter".into()));
        }
        if gamma.iter().any(|&g| g <= 0.0) {
            return Err(Error::invalid("investment return rates must be positive"));
        }
        if cap.iter().any(|&c| c < 0.0) {
            return Err(Error::invalid("emission caps must be nonnegative"));
        }
        Ok(KyotoInstance { rev, dmg, gamma, cap })
    }

    pub fn n(&self) -> usize {
        self.rev.len()
    }

    /// Dimension of a full action profile, `n (n + 1)`.
    pub fn dim(&self) -> usize {
        self.n() * (self.n() + 1)
    }

    /// Same instance with revenue parameters replaced.
    pub fn with_rev(&self, rev: Vec<f64>) -> Result<Self> {
        Self::new(rev, self.dmg.clone(), self.gamma.clone(), self.cap.clone())
    }

    /// `max cap * (1 + max gamma) * 4`, at least 1.
    pub fn box_cap(&self) -> f64 {
        let mc = self.cap.iter().copied().fold(0.0f64, f64::max);
        let mg = self.gamma.iter().copied().fold(0.0f64, f64::max);
        (mc * (1.0 + mg) * 4.0).max(1.0)
    }

    /// `(rev, dmg, gamma, cap)` concatenated.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(4 * self.n());
        for part in [&self.rev, &self.dmg, &self.gamma, &self.cap] {
            f.extend_from_slice(part);
        }
        f
    }
}

/// Emissions and the investment matrix (`inv[i * n + j]` is `I_ij`).
#[derive(Clone, Debug, PartialEq)]
pub struct KyotoAction {
    pub e: Vec<f64>,
    pub inv: Vec<f64>,
}

impl KyotoAction {
    pub fn zeros(n: usize) -> Self {
        KyotoAction { e: vec![0.0; n], inv: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.e.len()
    }

    pub fn i(&self, i: usize, j: usize) -> f64 {
        self.inv[i * self.n() + j]
    }

    pub fn from_flat(n: usize, x: &[f64]) -> Self {
        KyotoAction { e: x[..n].to_vec(), inv: x[n..n + n * n].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = self.e.clone();
        x.extend_from_slice(&self.inv);
        x
    }

    pub fn from_profile(n: usize, a: &[f64]) -> Self {
        let mut e = Vec::with_capacity(n);
        let mut inv = Vec::with_capacity(n * n);
        for i in 0..n {
            let block = &a[i * (n + 1)..(i + 1) * (n + 1)];
            e.push(block[0]);
            inv.extend_from_slice(&block[1..]);
        }
        KyotoAction { e, inv }
    }

    pub fn to_profile(&self) -> Vec<f64> {
        let n = self.n();
        let mut a = Vec::with_capacity(n * (n + 1));
        for i in 0..n {
            a.push(self.e[i]);
            a.extend_from_slice(&self.inv[i * n..(i + 1) * n]);
        }
        a
    }
}

/// Reorders a flat-layout vector into the profile layout.
pub fn flat_to_profile(n: usize, x: &[f64]) -> Vec<f64> {
    KyotoAction::from_flat(n, x).to_profile()
}

/// Reorders a profile-layout vector into the flat layout.
pub fn profile_to_flat(n: usize, a: &[f64]) -> Vec<f64> {
    KyotoAction::from_profile(n, a).to_flat()
}

fn net_emissions(inst: &KyotoInstance, act: &KyotoAction, form: DamageForm) -> f64 {
    let n = inst.n();
    (0..n)
        .map(|j| match form {
            DamageForm::Plain => act.e[j] - (0..n).map(|k| act.i(j, k)).sum::<f64>(),
            DamageForm::GammaWeighted => act.e[j] - inst.gamma[j] * (0..n).map(|k| act.i(k, j)).sum::<f64>(),
        })
        .sum()
}

/// Payoff of country `i` with the plain damage term.
pub fn country_payoff(inst: &KyotoInstance, i: usize, act: &KyotoAction) -> f64 {
    country_payoff_with(inst, i, act, DamageForm::Plain)
}

pub fn country_payoff_with(inst: &KyotoInstance, i: usize, act: &KyotoAction, form: DamageForm) -> f64 {
    let n = inst.n();
    let revenue = act.e[i] * (inst.rev[i] - 0.5 * act.e[i]);
    let mut cost = act.i(i, i) * act.i(i, i);
    for j in (0..n).filter(|&j| j != i) {
        let s = act.i(i, j) + act.i(j, j);
        cost += s * s - act.i(j, j) * act.i(j, j);
    }
    revenue - 0.5 * cost - inst.dmg[i] * net_emissions(inst, act, form)
}

/// Point whose squared distance to country `i`'s block equals twice its
/// payoff loss: `-u_i = |y_i - c_i|^2 / 2 + const(a_-i)`. The result is in
/// block order `(e_i, I_i1, .., I_in)` and depends only on others' blocks.
pub fn own_target(inst: &KyotoInstance, i: usize, profile: &[f64], form: DamageForm) -> Vec<f64> {
    let n = inst.n();
    let mut c = Vec::with_capacity(n + 1);
    c.push(inst.rev[i] - inst.dmg[i]);
    for k in 0..n {
        let w = match form {
            DamageForm::Plain => 1.0,
            DamageForm::GammaWeighted => inst.gamma[k],
        };
        let other = if k == i { 0.0 } else { profile[k * (n + 1) + 1 + k] };
        c.push(inst.dmg[i] * w - other);
    }
    c
}

/// Joint constraints over the flat layout: `n` cap rows, `n` transfer rows,
/// then `n (n + 1)` nonnegativity rows.
pub fn joint_halfspaces(inst: &KyotoInstance) -> Halfspaces {
    let n = inst.n();
    let dim = inst.dim();
    let ie = |i: usize, j: usize| n + i * n + j;
    let mut a = Vec::with_capacity((2 * n + dim) * dim);
    let mut b = Vec::with_capacity(2 * n + dim);
    for i in 0..n {
        let mut row = vec![0.0; dim];
        row[i] = 1.0;
        for j in 0..n {
            row[ie(i, j)] -= inst.gamma[j];
        }
        a.extend(row);
        b.push(inst.cap[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; dim];
        row[j] = -1.0;
        for k in 0..n {
            row[ie(k, j)] += inst.gamma[j];
        }
        a.extend(row);
        b.push(0.0);
    }
    for k in 0..dim {
        let mut row = vec![0.0; dim];
        row[k] = -1.0;
        a.extend(row);
        b.push(0.0);
    }
    Halfspaces { dim, a, b }
}

/// Slack of country `i`'s emission cap.
pub fn cap_slack(inst: &KyotoInstance, i: usize, act: &KyotoAction) -> f64 {
    let offset: f64 = (0..inst.n()).map(|j| inst.gamma[j] * act.i(i, j)).sum();
    inst.cap[i] - (act.e[i] - offset)
}

/// Slack of country `j`'s transfer balance.
pub fn transfer_slack(inst: &KyotoInstance, j: usize, act: &KyotoAction) -> f64 {
    act.e[j] - inst.gamma[j] * (0..inst.n()).map(|k| act.i(k, j)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CapPattern {
    /// No country emits at its cap.
    Interior,
    /// Some but not all countries emit at their cap.
    SomeAtCap,
    /// Every country emits at its cap.
    AllAtCap,
}

/// Binding pattern of an action.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionLabel {
    pub pattern: CapPattern,
    pub cross_investment: bool,
    pub at_cap: Vec<bool>,
    pub transfer_binding: Vec<bool>,
}

impl RegionLabel {
    /// Label without the cross-investment suffix.
    pub fn base(&self) -> &'static str {
        match self.pattern {
            CapPattern::Interior => "both-interior (Region 1)",
            CapPattern::SomeAtCap => "one-at-cap (Region 2a-like)",
            CapPattern::AllAtCap => "both-at-cap (Region 4b-like)",
        }
    }

    pub fn label(&self) -> String {
        let mut s = String::from(self.base());
        if self.cross_investment {
            s.push_str(" with cross-investment");
        }
        s
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Classifies which caps bind (slack within `tol`) and whether any country
/// invests more than `tol` abroad.
pub fn classify_gne(inst: &KyotoInstance, act: &KyotoAction, tol: f64) -> RegionLabel {
    let n = inst.n();
    let at_cap: Vec<bool> = (0..n).map(|i| cap_slack(inst, i, act).abs() <= tol).collect();
    let transfer_binding = (0..n).map(|j| transfer_slack(inst, j, act).abs() <= tol).collect();
    let cross_investment = (0..n).any(|i| (0..n).any(|j| j != i && act.i(i, j) > tol));
    let count = at_cap.iter().filter(|&&b| b).count();
    let pattern = if count == 0 {
        CapPattern::Interior
    } else if count == n {
        CapPattern::AllAtCap
    } else {
        CapPattern::SomeAtCap
    };
    RegionLabel { pattern, cross_investment, at_cap, transfer_binding }
}

/// Every parameter i.i.d. `Unif[0.5, 50]`.
pub fn sample_kyoto(n: usize, seed: u64) -> Result<KyotoInstance> {
    if n == 0 {
        return Err(Error::invalid("need at least one country"));
    }
    let mut r = rng::seeded(seed);
    let mut draw = || (0..n).map(|_| rng::uniform(&mut r, PARAM_RANGE.0, PARAM_RANGE.1)).collect::<Vec<_>>();
    let rev = draw();
    let dmg = draw();
    let gamma = draw();
    let cap = draw();
    KyotoInstance::new(rev, dmg, gamma, cap)
}

/// `k x k` grid of revenue pairs over `[0.5, 50]^2`, row-major in
/// `(beta_1, beta_2)`, on top of the fixed parameters of `base`.
pub fn comparative_statics_grid(base: &KyotoInstance, k: usize) -> Result<Vec<KyotoInstance>> {
    if base.n() != 2 || k < 2 {
        return Err(Error::invalid("grid needs two countries and at least two points per axis"));
    }
    let at = |t: usize| PARAM_RANGE.0 + (PARAM_RANGE.1 - PARAM_RANGE.0) * t as f64 / (k - 1) as f64;
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            out.push(base.with_rev(vec![at(a), at(b)])?);
        }
    }
    Ok(out)
}

/// `count` instances sharing the fixed parameters of `base` with revenue
/// parameters drawn i.i.d. `Unif[0.5, 50]`.
pub fn comparative_statics_sample(base: &KyotoInstance, count: usize, seed: u64) -> Result<Vec<KyotoInstance>> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| {
            let rev = (0..base.n()).map(|_| rng::uniform(&mut r, PARAM_RANGE.0, PARAM_RANGE.1)).collect();
            base.with_rev(rev)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_examples() {
        let inst = KyotoInstance::new(vec![3.0, 4.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(country_payoff(&inst, 0, &KyotoAction::zeros(2)), 0.0);
        let act = KyotoAction { e: vec![0.0, 0.0], inv: vec![0.0, 1.0, 0.0, 1.0] };
        assert_eq!(country_payoff(&inst, 0, &act), -1.5);
        let one = KyotoInstance::new(vec![3.0], vec![0.0], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(country_payoff(&one, 0, &KyotoAction { e: vec![3.0], inv: vec![0.0] }), 4.5);
    }

    #[test]
    fn layouts_round_trip() {
        let x: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let a = flat_to_profile(2, &x);
        assert_eq!(a, vec![0.0, 2.0, 3.0, 1.0, 4.0, 5.0]);
        assert_eq!(profile_to_flat(2, &a), x);
    }

    #[test]
    fn halfspace_rows_and_zero_feasibility() {
        for n in 1..=3 {
            let inst = sample_kyoto(n, n as u64).unwrap();
            let h = joint_halfspaces(&inst);
            assert_eq!(h.rows(), 2 * n + n * (n + 1));
            assert!(h.violation(&vec![0.0; inst.dim()]) <= 0.0);
        }
    }

    #[test]
    fn single_country_halfspaces() {
        let inst = KyotoInstance::new(vec![1.0], vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let h = joint_halfspaces(&inst);
        // e - I <= 1, -e + I <= 0, -e <= 0, -I <= 0
        assert_eq!(h.a, vec![1.0, -1.0, -1.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        assert_eq!(h.b, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn classification_labels() {
        let inst = KyotoInstance::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 3.0]).unwrap();
        let interior = KyotoAction { e: vec![1.0, 1.0], inv: vec![0.0; 4] };
        assert_eq!(classify_gne(&inst, &interior, CLASSIFY_TOL).label(), "both-interior (Region 1)");
        let both = KyotoAction { e: vec![2.0, 3.0], inv: vec![0.0; 4] };
        assert_eq!(classify_gne(&inst, &both, CLASSIFY_TOL).label(), "both-at-cap (Region 4b-like)");
        let one = KyotoAction { e: vec![2.0, 1.0], inv: vec![0.0; 4] };
        assert_eq!(classify_gne(&inst, &one, CLASSIFY_TOL).label(), "one-at-cap (Region 2a-like)");
        let cross = KyotoAction { e: vec![2.5, 1.0], inv: vec![0.0, 0.5, 0.0, 0.0] };
        assert_eq!(classify_gne(&inst, &cross, CLASSIFY_TOL).label(), "one-at-cap (Region 2a-like) with cross-investment");
    }

    #[test]
    fn own_target_matches_payoff_differences() {
        let inst = sample_kyoto(2, 11).unwrap();
        let mut r = rng::seeded(3);
        for form in [DamageForm::Plain, DamageForm::GammaWeighted] {
            for _ in 0..20 {
                let a: Vec<f64> = (0..6).map(|_| rng::uniform(&mut r, 0.0, 5.0)).collect();
                let b: Vec<f64> = (0..6).map(|_| rng::uniform(&mut r, 0.0, 5.0)).collect();
                for i in 0..2 {
                    let c = own_target(&inst, i, &a, form);
                    let mut dev = a.clone();
                    dev[i * 3..i * 3 + 3].copy_from_slice(&b[i * 3..i * 3 + 3]);
                    let du = country_payoff_with(&inst, i, &KyotoAction::from_profile(2, &dev), form)
                        - country_payoff_with(&inst, i, &KyotoAction::from_profile(2, &a), form);
                    let d2 = |y: &[f64]| y.iter().zip(&c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
                    let expected = 0.5 * d2(&a[i * 3..i * 3 + 3]) - 0.5 * d2(&b[i * 3..i * 3 + 3]);
                    assert!((du - expected).abs() < 1e-9 * (1.0 + du.abs()), "{} vs {}", du, expected);
                }
            }
        }
    }

    #[test]
    fn grid_varies_only_revenue() {
        let base = sample_kyoto(2, 4).unwrap();
        let grid = comparative_statics_grid(&base, 10).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.iter().all(|g| g.dmg == base.dmg && g.gamma == base.gamma && g.cap == base.cap));
        assert_eq!(grid[0].rev, vec![0.5, 0.5]);
        assert_eq!(grid[99].rev, vec![50.0, 50.0]);
    }
}
