//! Arrow-Debreu exchange economies.
//!
//! `n` buyers trade `m` goods. Buyer `i` owns the endowment row `E_i`, values
//! bundles through one utility family parameterized by the valuation row
//! `V_i` (and `rho_i` for CES), and may buy any bundle whose cost at prices
//! `p` does not exceed the value of its endowment. As a pseudo-game
//! ([`ExchangeGame`]) the buyers are joined by a seller who picks prices on
//! the simplex to maximize the value of excess demand; its equilibria are
//! exactly the competitive equilibria.

mod diff;
mod game;

pub use diff::{cumulative_regret_var, demand_var, exploitability_var, regret_vars, utility_var, OracleGrad};
pub use game::ExchangeGame;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math;
use crate::rng::{self, SeededRng};
use crate::{Error, Result};

/// Prices below this are raised to it before demands are computed.
pub const PRICE_FLOOR: f64 = 1e-9;

/// Lower end of sampled valuations and endowments.
pub const SAMPLE_MIN: f64 = 1e-9;

/// Substitution parameters of non-CES economies are network features only;
/// they are drawn from this range.
pub const FEATURE_RHO: (f64, f64) = (0.25, 0.75);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Linear,
    CobbDouglas,
    Leontief,
    Ces,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Linear, Family::CobbDouglas, Family::Leontief, Family::Ces];

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::CobbDouglas => "cobb_douglas",
            Family::Leontief => "leontief",
            Family::Ces => "ces",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Range of CES substitution parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoRange {
    /// `[0.5, 1]`
    GrossSubstitutes,
    /// `[-1.25, -0.75]`
    GrossComplements,
    /// Union of the two ranges above, each picked with equal probability.
    Mixed,
    /// Custom interval; must exclude 0 and stay at or below 1.
    Interval(f64, f64),
}

impl RhoRange {
    pub fn name(self) -> String {
        match self {
            RhoRange::GrossSubstitutes => "gs".into(),
            RhoRange::GrossComplements => "gc".into(),
            RhoRange::Mixed => "mixed".into(),
            RhoRange::Interval(lo, hi) => format!("{}:{}", lo, hi),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gs" => Some(RhoRange::GrossSubstitutes),
            "gc" => Some(RhoRange::GrossComplements),
            "mixed" => Some(RhoRange::Mixed),
            other => {
                let (lo, hi) = other.split_once(':')?;
                Some(RhoRange::Interval(lo.parse().ok()?, hi.parse().ok()?))
            }
        }
    }

    fn validate(self) -> Result<()> {
        if let RhoRange::Interval(lo, hi) = self {
            if !(lo <= hi && hi <= 1.0 && lo.is_finite() && (lo > 0.0 || hi < 0.0)) {
                return Err(Error::invalid(format!("CES range [{}, {}] must avoid 0 and stay <= 1", lo, hi)));
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        const GS: (f64, f64) = (0.5, 1.0);
        const GC: (f64, f64) = (-1.25, -0.75);
        let (lo, hi) = match self {
            RhoRange::GrossSubstitutes => GS,
            RhoRange::GrossComplements => GC,
            RhoRange::Mixed => {
                if rng.gen::<bool>() {
                    GS
                } else {
                    GC
                }
            }
            RhoRange::Interval(lo, hi) => (lo, hi),
        };
        rng::uniform(rng, lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeEconomy {
    family: Family,
    n: usize,
    m: usize,
    v: Vec<f64>,
    e: Vec<f64>,
    rho: Vec<f64>,
}

impl ExchangeEconomy {
    /// `v` and `e` are `n x m` row-major. Entries must be finite and
    /// nonnegative with at least one positive entry per row; CES economies
    /// need every `rho_i` nonzero and at most 1.
    pub fn new(family: Family, n: usize, m: usize, v: Vec<f64>, e: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("economy needs at least one buyer and one good"));
        }
        if v.len() != n * m || e.len() != n * m || rho.len() != n {
            return Err(Error::shape(format!(
                "{} buyers x {} goods: V has {}, E has {}, rho has {} entries",
                n,
                m,
                v.len(),
                e.len(),
                rho.len()
            )));
        }
        for (name, mat) in [("valuation", &v), ("endowment", &e)] {
            if mat.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid(format!("{} entries must be finite and nonnegative", name)));
            }
            if let Some(i) = (0..n).find(|&i| mat[i * m..(i + 1) * m].iter().all(|&x| x == 0.0)) {
                return Err(Error::invalid(format!("{} row {} is zero", name, i)));
            }
        }
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("rho".into()));
        }
        if family == Family::Ces {
            if let Some(i) = rho.iter().position(|&r| r == 0.0 || r > 1.0) {
                return Err(Error::invalid(format!("CES rho[{}] = {} must be nonzero and <= 1", i, rho[i])));
            }
        }
        Ok(ExchangeEconomy { family, n, m, v, e, rho })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_buyers(&self) -> usize {
        self.n
    }

    pub fn m_goods(&self) -> usize {
        self.m
    }

    pub fn valuations(&self) -> &[f64] {
        &self.v
    }

    pub fn endowments(&self) -> &[f64] {
        &self.e
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn v_row(&self, i: usize) -> &[f64] {
        &self.v[i * self.m..(i + 1) * self.m]
    }

    pub fn e_row(&self, i: usize) -> &[f64] {
        &self.e[i * self.m..(i + 1) * self.m]
    }

    /// Value of buyer `i`'s endowment at `prices`.
    pub fn budget(&self, i: usize, prices: &[f64]) -> f64 {
        math::dot(self.e_row(i), prices)
    }

    /// Column sums of the endowment matrix.
    pub fn supply(&self) -> Vec<f64> {
        column_sums(&self.e, self.n, self.m)
    }

    /// Same economy with buyers reordered: row `k` of the result is row
    /// `perm[k]` of `self`.
    pub fn permute_buyers(&self, perm: &[usize]) -> Self {
        let pick = |mat: &[f64]| perm.iter().flat_map(|&i| mat[i * self.m..(i + 1) * self.m].iter().copied()).collect();
        ExchangeEconomy {
            family: self.family,
            n: self.n,
            m: self.m,
            v: pick(&self.v),
            e: pick(&self.e),
            rho: perm.iter().map(|&i| self.rho[i]).collect(),
        }
    }

    /// Utility of buyer `i` for bundle `x`.
    pub fn utility(&self, i: usize, x: &[f64]) -> f64 {
        utility(self.family, self.v_row(i), self.rho[i], x)
    }

    /// Utility-maximizing bundle of buyer `i` at `prices` with `budget`.
    pub fn demand(&self, i: usize, prices: &[f64], budget: f64) -> Result<Vec<f64>> {
        demand(self.family, self.v_row(i), self.rho[i], prices, budget)
    }

    /// Aggregate demand minus aggregate supply when every buyer spends the
    /// value of its endowment.
    pub fn excess_demand(&self, prices: &[f64]) -> Result<Vec<f64>> {
        check_prices(prices, self.m)?;
        let mut z: Vec<f64> = self.supply().iter().map(|s| -s).collect();
        for i in 0..self.n {
            let x = self.demand(i, prices, self.budget(i, prices))?;
            for (zj, xj) in z.iter_mut().zip(&x) {
                *zj += xj;
            }
        }
        Ok(z)
    }

    /// Demands of every buyer at `prices`, row-major `n x m`.
    pub fn demands(&self, prices: &[f64]) -> Result<Vec<f64>> {
        check_prices(prices, self.m)?;
        let mut out = Vec::with_capacity(self.n * self.m);
        for i in 0..self.n {
            out.extend(self.demand(i, prices, self.budget(i, prices))?);
        }
        Ok(out)
    }

    /// Demands at floored prices with budgets at the given prices, so the
    /// result is affordable at `prices` even when some are zero.
    pub fn floored_demands(&self, prices: &[f64]) -> Vec<f64> {
        let floored: Vec<f64> = prices.iter().map(|p| p.max(PRICE_FLOOR)).collect();
        let mut out = Vec::with_capacity(self.n * self.m);
        for i in 0..self.n {
            let b = self.budget(i, prices).max(0.0);
            out.extend(self.demand(i, &floored, b).expect("floored prices are positive"));
        }
        out
    }

    /// Flattened `(V, E, rho)` feature vector.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(2 * self.n * self.m + self.n);
        f.extend_from_slice(&self.v);
        f.extend_from_slice(&self.e);
        f.extend_from_slice(&self.rho);
        f
    }
}

fn column_sums(mat: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            s[j] += mat[i * m + j];
        }
    }
    s
}

fn check_prices(prices: &[f64], m: usize) -> Result<()> {
    if prices.len() != m {
        return Err(Error::shape(format!("{} prices for {} goods", prices.len(), m)));
    }
    if let Some(j) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::invalid(format!("price of good {} is {}", j, prices[j])));
    }
    Ok(())
}

/// Maps prices onto the simplex with every entry at least [`PRICE_FLOOR`]:
/// negative and non-finite entries become zero, the rest is normalized, and
/// if some entry is then below the floor the result is mixed with the floor
/// as `floor + (1 - m floor) q`.
pub fn floor_prices(prices: &[f64]) -> Vec<f64> {
    let m = prices.len();
    let mut q: Vec<f64> = prices.iter().map(|x| if x.is_finite() { x.max(0.0) } else { 0.0 }).collect();
    let s: f64 = q.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return vec![1.0 / m as f64; m];
    }
    for x in &mut q {
        *x /= s;
    }
    if q.iter().all(|&x| x >= PRICE_FLOOR) {
        return q;
    }
    let scale = 1.0 - m as f64 * PRICE_FLOOR;
    q.iter().map(|x| PRICE_FLOOR + scale * x).collect()
}

/// Utility of a bundle. Zero quantities of valued goods give 0 for
/// Cobb-Douglas and for CES with `rho < 0`. Goods with zero valuation are
/// ignored by Leontief.
pub fn utility(family: Family, v: &[f64], rho: f64, x: &[f64]) -> f64 {
    match family {
        Family::Linear => math::dot(v, x),
        Family::CobbDouglas => {
            let mut log = 0.0;
            for (&vj, &xj) in v.iter().zip(x) {
                if vj == 0.0 {
                    continue;
                }
                if xj <= 0.0 {
                    return 0.0;
                }
                log += vj * math::ln(xj);
            }
            math::exp(log)
        }
        Family::Leontief => v
            .iter()
            .zip(x)
            .filter(|(&vj, _)| vj > 0.0)
            .map(|(&vj, &xj)| xj / vj)
            .fold(f64::INFINITY, f64::min),
        Family::Ces => {
            if rho == 1.0 {
                return math::dot(v, x);
            }
            let mut terms = Vec::with_capacity(v.len());
            for (&vj, &xj) in v.iter().zip(x) {
                if vj == 0.0 {
                    continue;
                }
                if xj <= 0.0 {
                    if rho < 0.0 {
                        return 0.0;
                    }
                    continue;
                }
                terms.push(math::ln(vj) + rho * math::ln(xj));
            }
            if terms.is_empty() {
                return 0.0;
            }
            math::exp(math::log_sum_exp(&terms) / rho)
        }
    }
}

/// Utility-maximizing bundle at strictly positive `prices` that spends
/// exactly `budget`.
pub fn demand(family: Family, v: &[f64], rho: f64, prices: &[f64], budget: f64) -> Result<Vec<f64>> {
    check_prices(prices, v.len())?;
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::invalid(format!("budget {} must be finite and nonnegative", budget)));
    }
    let m = v.len();
    let out = match family {
        Family::Linear => linear_demand(v, prices, budget),
        Family::Ces if rho == 1.0 => linear_demand(v, prices, budget),
        Family::CobbDouglas => {
            let s: f64 = v.iter().sum();
            (0..m).map(|j| v[j] / s * budget / prices[j]).collect()
        }
        Family::Leontief => {
            let cost = math::dot(prices, v);
            v.iter().map(|&vj| vj * budget / cost).collect()
        }
        Family::Ces => {
            let sigma = 1.0 / (1.0 - rho);
            let lv: Vec<f64> = v.iter().map(|&x| math::ln(x.max(1e-300))).collect();
            let lp: Vec<f64> = prices.iter().map(|&p| math::ln(p)).collect();
            let terms: Vec<f64> = (0..m).map(|k| sigma * lv[k] + (1.0 - sigma) * lp[k]).collect();
            let lse = math::log_sum_exp(&terms);
            (0..m)
                .map(|j| {
                    if v[j] == 0.0 || budget == 0.0 {
                        0.0
                    } else {
                        math::exp(math::ln(budget) + sigma * (lv[j] - lp[j]) - lse)
                    }
                })
                .collect()
        }
    };
    Ok(out)
}

/// Index of the good with the best valuation per unit of money, lowest
/// index on ties.
pub fn bang_per_buck_argmax(v: &[f64], prices: &[f64]) -> usize {
    let ratios: Vec<f64> = v.iter().zip(prices).map(|(a, b)| a / b).collect();
    math::argmax(&ratios)
}

fn linear_demand(v: &[f64], prices: &[f64], budget: f64) -> Vec<f64> {
    let j = bang_per_buck_argmax(v, prices);
    let mut x = vec![0.0; v.len()];
    x[j] = budget / prices[j];
    x
}

/// Prices on the simplex together with an `n x m` allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketOutcome {
    pub prices: Vec<f64>,
    /// Row-major `n x m`.
    pub allocation: Vec<f64>,
}

impl MarketOutcome {
    pub fn allocation_row(&self, i: usize) -> &[f64] {
        let m = self.prices.len();
        &self.allocation[i * m..(i + 1) * m]
    }

    /// Profile layout of [`ExchangeGame`]: allocation rows, then prices.
    pub fn to_profile(&self) -> Vec<f64> {
        let mut a = self.allocation.clone();
        a.extend_from_slice(&self.prices);
        a
    }

    pub fn from_profile(economy: &ExchangeEconomy, profile: &[f64]) -> Result<Self> {
        let (n, m) = (economy.n, economy.m);
        if profile.len() != n * m + m {
            return Err(Error::shape(format!("profile has {} entries, economy needs {}", profile.len(), n * m + m)));
        }
        Ok(MarketOutcome { prices: profile[n * m..].to_vec(), allocation: profile[..n * m].to_vec() })
    }

    /// Checks shape, simplex prices and budget feasibility.
    pub fn validate(&self, economy: &ExchangeEconomy) -> Result<()> {
        let (n, m) = (economy.n, economy.m);
        if self.prices.len() != m || self.allocation.len() != n * m {
            return Err(Error::shape(format!(
                "outcome has {} prices and {} allocations for {} x {}",
                self.prices.len(),
                self.allocation.len(),
                n,
                m
            )));
        }
        if self.prices.iter().chain(&self.allocation).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("outcome entry".into()));
        }
        let s: f64 = self.prices.iter().sum();
        if (s - 1.0).abs() > 1e-9 || self.prices.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid(format!("prices are not on the simplex (sum {})", s)));
        }
        if self.allocation.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("negative allocation"));
        }
        for i in 0..n {
            let spend = math::dot(self.allocation_row(i), &self.prices);
            let budget = economy.budget(i, &self.prices);
            if spend > budget + 1e-9 {
                return Err(Error::Infeasible { player: i, index: 0, value: budget - spend });
            }
        }
        Ok(())
    }
}

/// A failed competitive-equilibrium condition.
#[derive(Clone, Debug, PartialEq)]
pub enum CeViolation {
    /// The buyer could gain `gap` utility within its budget.
    BuyerRegret { buyer: usize, gap: f64 },
    /// Good `good` is allocated `excess` beyond supply.
    Overdemand { good: usize, excess: f64 },
    /// Value of aggregate excess demand is not zero.
    ValueImbalance(f64),
}

impl fmt::Display for CeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CeViolation::BuyerRegret { buyer, gap } => write!(f, "buyer regret: buyer {} gains {:e}", buyer, gap),
            CeViolation::Overdemand { good, excess } => write!(f, "overdemand: good {} exceeds supply by {:e}", good, excess),
            CeViolation::ValueImbalance(v) => write!(f, "value imbalance: p.(sum X - sum E) = {:e}", v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CeReport {
    pub violations: Vec<CeViolation>,
    pub buyer_regret: Vec<f64>,
}

impl CeReport {
    pub fn is_equilibrium(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the competitive-equilibrium conditions at tolerance `tol`. The
/// outcome must satisfy the [`MarketOutcome`] invariants and every price
/// must be at least [`PRICE_FLOOR`].
pub fn is_competitive_equilibrium(economy: &ExchangeEconomy, outcome: &MarketOutcome, tol: f64) -> Result<CeReport> {
    outcome.validate(economy)?;
    if let Some(j) = outcome.prices.iter().position(|&p| p < PRICE_FLOOR) {
        return Err(Error::invalid(format!("price of good {} is below the floor", j)));
    }
    let mut violations = Vec::new();
    let mut buyer_regret = Vec::with_capacity(economy.n);
    for i in 0..economy.n {
        let x = economy.demand(i, &outcome.prices, economy.budget(i, &outcome.prices))?;
        let gap = economy.utility(i, &x) - economy.utility(i, outcome.allocation_row(i));
        if gap > tol {
            violations.push(CeViolation::BuyerRegret { buyer: i, gap });
        }
        buyer_regret.push(gap);
    }
    let demand = column_sums(&outcome.allocation, economy.n, economy.m);
    let z: Vec<f64> = demand.iter().zip(economy.supply()).map(|(d, s)| d - s).collect();
    for (j, &zj) in z.iter().enumerate() {
        if zj > tol {
            violations.push(CeViolation::Overdemand { good: j, excess: zj });
        }
    }
    let value = math::dot(&outcome.prices, &z);
    if value.abs() > tol {
        violations.push(CeViolation::ValueImbalance(value));
    }
    Ok(CeReport { violations, buyer_regret })
}

/// Samples an economy with valuations and endowments i.i.d.
/// `Unif[1e-9, 1]`. CES economies draw `rho` from `rho_range`; other
/// families draw it from [`FEATURE_RHO`].
pub fn sample_economy(family: Family, n: usize, m: usize, rho_range: RhoRange, seed: u64) -> Result<ExchangeEconomy> {
    rho_range.validate()?;
    let mut rng = rng::seeded(seed);
    sample_economy_with(family, n, m, rho_range, &mut rng)
}

pub fn sample_economy_with(
    family: Family,
    n: usize,
    m: usize,
    rho_range: RhoRange,
    rng: &mut SeededRng,
) -> Result<ExchangeEconomy> {
    rho_range.validate()?;
    let v = (0..n * m).map(|_| rng::uniform(rng, SAMPLE_MIN, 1.0)).collect();
    let e = (0..n * m).map(|_| rng::uniform(rng, SAMPLE_MIN, 1.0)).collect();
    let rho = (0..n)
        .map(|_| match family {
            Family::Ces => loop {
                let r = rho_range.draw(rng);
                if r != 0.0 {
                    break r;
                }
            },
            _ => rng::uniform(rng, FEATURE_RHO.0, FEATURE_RHO.1),
        })
        .collect();
    ExchangeEconomy::new(family, n, m, v, e, rho)
}

/// The 3-buyer, 3-good Leontief economy with identity endowments and cyclic
/// valuations, whose unique equilibrium prices are uniform.
pub fn scarf_economy() -> ExchangeEconomy {
    #[rustfmt::skip]
    let v = vec![
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        1.0, 0.0, 0.0,
    ];
    #[rustfmt::skip]
    let e = vec![
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
    ];
    ExchangeEconomy::new(Family::Leontief, 3, 3, v, e, vec![0.5; 3]).expect("fixed economy")
}

/// Allocation coefficient matrix: entry `(i, j)` is `(E_i . p) / p_j`, the
/// quantity of good `j` buyer `i` affords when spending its whole budget on it.
pub fn allocation_coefficients(economy: &ExchangeEconomy, prices: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(economy.n * economy.m);
    for i in 0..economy.n {
        let b = economy.budget(i, prices);
        c.extend(prices.iter().map(|&p| b / p));
    }
    c
}

/// Draws prices uniformly from the simplex and spends every budget in
/// random proportions.
pub fn uniform_feasible_outcome(economy: &ExchangeEconomy, seed: u64) -> MarketOutcome {
    uniform_feasible_outcome_with(economy, &mut rng::seeded(seed))
}

pub fn uniform_feasible_outcome_with(economy: &ExchangeEconomy, rng: &mut SeededRng) -> MarketOutcome {
    let prices = loop {
        let p = rng::simplex(rng, economy.m);
        if p.iter().all(|&x| x > 0.0) {
            break p;
        }
    };
    let coef = allocation_coefficients(economy, &prices);
    let mut allocation = Vec::with_capacity(economy.n * economy.m);
    for i in 0..economy.n {
        let shares = rng::normalized_uniforms(rng, economy.m);
        allocation.extend(shares.iter().zip(&coef[i * economy.m..]).map(|(s, c)| s * c));
    }
    MarketOutcome { prices, allocation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(Family::Linear, &[1.0, 2.0], 0.5, &[1.0, 1.0]), 3.0);
        assert_eq!(utility(Family::Leontief, &[1.0, 2.0], 0.5, &[2.0, 2.0]), 1.0);
        assert!((utility(Family::Ces, &[1.0, 1.0], 1.0, &[1.0, 2.0]) - 3.0).abs() < 1e-15);
        assert_eq!(utility(Family::CobbDouglas, &[0.5, 0.5], 0.5, &[0.0, 2.0]), 0.0);
        assert_eq!(utility(Family::Ces, &[0.5, 0.5], -1.0, &[0.0, 2.0]), 0.0);
    }

    #[test]
    fn demand_examples() {
        let cd = demand(Family::CobbDouglas, &[0.5, 0.5], 0.5, &[0.5, 0.5], 1.0).unwrap();
        assert!(close(&cd, &[1.0, 1.0], 1e-15));
        let le = demand(Family::Leontief, &[1.0, 1.0], 0.5, &[0.5, 0.5], 1.0).unwrap();
        assert!(close(&le, &[1.0, 1.0], 1e-15));
        let li = demand(Family::Linear, &[1.0, 3.0], 0.5, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(li, vec![0.0, 2.0]);
        let tie = demand(Family::Linear, &[1.0, 1.0], 0.5, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(tie, vec![2.0, 0.0]);
    }

    #[test]
    fn nonpositive_price_is_rejected() {
        assert!(demand(Family::Linear, &[1.0, 1.0], 0.5, &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn scarf_clears_at_uniform_prices() {
        let s = scarf_economy();
        assert_eq!(s.e_row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(s.v_row(0), &[0.0, 1.0, 0.0]);
        let z = s.excess_demand(&[1.0 / 3.0; 3]).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-9), "{:?}", z);
    }

    #[test]
    fn single_buyer_walras() {
        let e = ExchangeEconomy::new(Family::CobbDouglas, 1, 2, vec![0.3, 0.7], vec![1.0, 1.0], vec![0.5]).unwrap();
        let p = [0.2, 0.8];
        let z = e.excess_demand(&p).unwrap();
        assert!(math::dot(&p, &z).abs() < 1e-9);
    }

    #[test]
    fn perturbed_allocation_reports_buyer_regret() {
        // one buyer owning everything: demand at any prices is a CE
        let e = ExchangeEconomy::new(Family::CobbDouglas, 1, 2, vec![0.5, 0.5], vec![1.0, 1.0], vec![0.5]).unwrap();
        let p = vec![0.5, 0.5];
        let x = e.demands(&p).unwrap();
        let ce = MarketOutcome { prices: p.clone(), allocation: x.clone() };
        assert!(is_competitive_equilibrium(&e, &ce, 1e-9).unwrap().is_equilibrium());
        // move 10% of spend from good 0 to good 1
        let moved = MarketOutcome { prices: p, allocation: vec![x[0] * 0.9, x[1] + x[0] * 0.1] };
        let report = is_competitive_equilibrium(&e, &moved, 1e-9).unwrap();
        assert!(!report.is_equilibrium());
        assert!(report.violations[0].to_string().starts_with("buyer regret"));
    }

    #[test]
    fn zero_price_fails_precondition() {
        let e = ExchangeEconomy::new(Family::Linear, 1, 2, vec![0.5, 0.5], vec![1.0, 1.0], vec![0.5]).unwrap();
        let o = MarketOutcome { prices: vec![1.0, 0.0], allocation: vec![1.0, 5.0] };
        assert!(is_competitive_equilibrium(&e, &o, 1e-6).is_err());
    }

    #[test]
    fn invalid_economies_are_rejected() {
        assert!(ExchangeEconomy::new(Family::Ces, 1, 1, vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(ExchangeEconomy::new(Family::Ces, 1, 1, vec![1.0], vec![1.0], vec![1.5]).is_err());
        assert!(ExchangeEconomy::new(Family::Linear, 1, 2, vec![1.0, -1.0], vec![1.0, 1.0], vec![0.5]).is_err());
        assert!(ExchangeEconomy::new(Family::Linear, 1, 2, vec![1.0, 1.0], vec![0.0, 0.0], vec![0.5]).is_err());
        assert!(ExchangeEconomy::new(Family::Linear, 2, 2, vec![1.0; 4], vec![1.0; 3], vec![0.5; 2]).is_err());
        assert!(RhoRange::Interval(-0.5, 0.5).validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in Family::ALL {
            assert_eq!(Family::from_name(f.name()), Some(f));
        }
        for r in [RhoRange::GrossSubstitutes, RhoRange::GrossComplements, RhoRange::Mixed, RhoRange::Interval(0.5, 0.9)] {
            assert_eq!(RhoRange::from_name(&r.name()), Some(r));
        }
    }

    #[test]
    fn sampled_outcomes_are_feasible() {
        let e = sample_economy(Family::Linear, 3, 5, RhoRange::GrossSubstitutes, 9).unwrap();
        for s in 0..50 {
            uniform_feasible_outcome(&e, s).validate(&e).unwrap();
        }
    }
}
