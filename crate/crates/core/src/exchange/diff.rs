//! Differentiable versions of utilities, demands and regrets, recorded on a
//! [`Tape`]. Allocations are flat `[n * m]` variables, prices `[m]`.

use alloc::vec;
use alloc::vec::Vec;

use super::{bang_per_buck_argmax, ExchangeEconomy, Family, PRICE_FLOOR};
use crate::math;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Quantities are clamped to this before taking logarithms.
const LOG_FLOOR: f64 = 1e-300;
/// Added to Leontief ratios of goods with zero valuation so they never bind.
const UNVALUED: f64 = 1e300;

/// How best responses enter the regret graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleGrad {
    /// Best responses are recorded as functions of the prices.
    Pathwise,
    /// Best responses keep their spending shares fixed and are rebuilt as
    /// `share * budget / p`, as an allocation-coefficient head would.
    Detached,
}

fn constant(tape: &mut Tape, xs: Vec<f64>) -> Var {
    tape.leaf(Tensor::vector(xs))
}

fn log_floor(tape: &mut Tape, x: Var) -> Var {
    let c = tape.clamp_min(x, LOG_FLOOR);
    tape.ln(c)
}

/// Scalar utility of buyer `i` for the `[m]` bundle `x`.
pub fn utility_var(tape: &mut Tape, economy: &ExchangeEconomy, i: usize, x: Var) -> Var {
    let v = economy.v_row(i).to_vec();
    let rho = economy.rho()[i];
    match economy.family() {
        Family::Linear => {
            let vc = constant(tape, v);
            tape.dot(vc, x)
        }
        Family::Ces if rho == 1.0 => {
            let vc = constant(tape, v);
            tape.dot(vc, x)
        }
        Family::CobbDouglas => {
            let vc = constant(tape, v);
            let lx = log_floor(tape, x);
            let s = tape.dot(vc, lx);
            tape.exp(s)
        }
        Family::Leontief => {
            let w = constant(tape, v.iter().map(|&vj| if vj > 0.0 { 1.0 / vj } else { 0.0 }).collect());
            let c = constant(tape, v.iter().map(|&vj| if vj > 0.0 { 0.0 } else { UNVALUED }).collect());
            let r = tape.mul(x, w);
            let r = tape.add(r, c);
            let mn = tape.min_last(r);
            tape.sum(mn)
        }
        Family::Ces => {
            let lv = constant(tape, v.iter().map(|&vj| math::ln(vj.max(LOG_FLOOR))).collect());
            let lx = log_floor(tape, x);
            let t = tape.mul_scalar(lx, rho);
            let t = tape.add(lv, t);
            let lse = tape.log_sum_exp_last(t);
            let s = tape.mul_scalar(lse, 1.0 / rho);
            let u = tape.exp(s);
            tape.sum(u)
        }
    }
}

/// `[m]` demand of buyer `i` at strictly positive prices `p` (`[m]`) with the
/// scalar `budget`. Linear demand differentiates with the chosen good held
/// fixed.
pub fn demand_var(tape: &mut Tape, economy: &ExchangeEconomy, i: usize, p: Var, budget: Var) -> Var {
    let v = economy.v_row(i).to_vec();
    let m = v.len();
    let rho = economy.rho()[i];
    let linear = |tape: &mut Tape| {
        let j = bang_per_buck_argmax(&v, tape.value(p).data());
        let mut mask = vec![0.0; m];
        mask[j] = 1.0;
        let mc = constant(tape, mask);
        let spend = tape.mul(mc, budget);
        tape.div(spend, p)
    };
    match economy.family() {
        Family::Linear => linear(tape),
        Family::Ces if rho == 1.0 => linear(tape),
        Family::CobbDouglas => {
            let s: f64 = v.iter().sum();
            let share = constant(tape, v.iter().map(|vj| vj / s).collect());
            let spend = tape.mul(share, budget);
            tape.div(spend, p)
        }
        Family::Leontief => {
            let vc = constant(tape, v);
            let cost = tape.dot(p, vc);
            let scale = tape.div(budget, cost);
            tape.mul(vc, scale)
        }
        Family::Ces => {
            let sigma = 1.0 / (1.0 - rho);
            let lv: Vec<f64> = v.iter().map(|&vj| math::ln(vj.max(LOG_FLOOR))).collect();
            let lp = tape.ln(p);
            let sv = constant(tape, lv.iter().map(|l| sigma * l).collect());
            let tp = tape.mul_scalar(lp, 1.0 - sigma);
            let terms = tape.add(sv, tp);
            let lse = tape.log_sum_exp_last(terms);
            let lb = log_floor(tape, budget);
            let sp = tape.mul_scalar(lp, -sigma);
            let logx = tape.add(sv, sp);
            let logx = tape.sub(logx, lse);
            let logx = tape.add(logx, lb);
            let x = tape.exp(logx);
            let zero_mask = constant(tape, v.iter().map(|&vj| if vj > 0.0 { 1.0 } else { 0.0 }).collect());
            tape.mul(x, zero_mask)
        }
    }
}

/// Regret of every player (buyers first, seller last) as scalar variables.
/// Buyers best-respond at prices floored at [`PRICE_FLOOR`] with budgets at
/// the unfloored prices; the seller's regret is `max_j z_j - p . z`.
pub fn regret_vars(tape: &mut Tape, economy: &ExchangeEconomy, x: Var, p: Var, oracle: OracleGrad) -> Vec<Var> {
    let (n, m) = (economy.n_buyers(), economy.m_goods());
    let pf = tape.clamp_min(p, PRICE_FLOOR);
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let xi = tape.slice_last(x, i * m, m);
        let ec = constant(tape, economy.e_row(i).to_vec());
        let budget = tape.dot(ec, p);
        let br = match oracle {
            OracleGrad::Pathwise => demand_var(tape, economy, i, pf, budget),
            OracleGrad::Detached => {
                let prices = tape.value(pf).data().to_vec();
                let b = tape.value(budget).item().max(0.0);
                let d = economy.demand(i, &prices, b).expect("floored prices are positive");
                let shares = if b > 0.0 { d.iter().zip(&prices).map(|(dj, pj)| dj * pj / b).collect() } else { vec![0.0; m] };
                let sc = constant(tape, shares);
                let spend = tape.mul(sc, budget);
                tape.div(spend, pf)
            }
        };
        let ub = utility_var(tape, economy, i, br);
        let ua = utility_var(tape, economy, i, xi);
        out.push(tape.sub(ub, ua));
    }
    let xm = tape.reshape(x, &[n, m]);
    let xt = tape.transpose(xm);
    let demand = tape.sum_last(xt);
    let demand = tape.reshape(demand, &[m]);
    let supply = constant(tape, economy.supply());
    let z = tape.sub(demand, supply);
    let best = tape.max_last(z);
    let best = tape.sum(best);
    let current = tape.dot(p, z);
    out.push(tape.sub(best, current));
    out
}

/// Scalar exploitability of the outcome `(x, p)`.
pub fn exploitability_var(tape: &mut Tape, economy: &ExchangeEconomy, x: Var, p: Var, oracle: OracleGrad) -> Var {
    let regrets = regret_vars(tape, economy, x, p, oracle);
    let mut total = regrets[0];
    for &r in &regrets[1..] {
        total = tape.add(total, r);
    }
    total
}

/// Cumulative regret of the deviation profile `dev` against the outcome
/// `a`, both flat `[n * m + m]` (allocation rows, then prices). Buyer
/// deviations are used as given; the seller's regret is `(q - p) . z` with
/// `z` the excess allocation of `a`.
pub fn cumulative_regret_var(tape: &mut Tape, economy: &ExchangeEconomy, a: Var, dev: Var) -> Var {
    let (n, m) = (economy.n_buyers(), economy.m_goods());
    let x = tape.slice_last(a, 0, n * m);
    let p = tape.slice_last(a, n * m, m);
    let q = tape.slice_last(dev, n * m, m);
    let mut total = None;
    for i in 0..n {
        let xi = tape.slice_last(x, i * m, m);
        let bi = tape.slice_last(dev, i * m, m);
        let ub = utility_var(tape, economy, i, bi);
        let ua = utility_var(tape, economy, i, xi);
        let r = tape.sub(ub, ua);
        total = Some(match total {
            Some(t) => tape.add(t, r),
            None => r,
        });
    }
    let xm = tape.reshape(x, &[n, m]);
    let xt = tape.transpose(xm);
    let demand = tape.sum_last(xt);
    let demand = tape.reshape(demand, &[m]);
    let supply = constant(tape, economy.supply());
    let z = tape.sub(demand, supply);
    let gap = tape.sub(q, p);
    let seller = tape.dot(gap, z);
    match total {
        Some(t) => tape.add(t, seller),
        None => seller,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{sample_economy, uniform_feasible_outcome, ExchangeGame, RhoRange};
    use crate::pseudogame::exploitability;

    #[test]
    fn tape_values_match_plain_evaluation() {
        for (k, family) in Family::ALL.into_iter().enumerate() {
            let e = sample_economy(family, 3, 4, RhoRange::Mixed, 40 + k as u64).unwrap();
            let o = uniform_feasible_outcome(&e, 7);
            let mut t = Tape::new();
            let x = t.vector(o.allocation.clone());
            let p = t.vector(o.prices.clone());
            for i in 0..3 {
                let xi = t.slice_last(x, i * 4, 4);
                let u = utility_var(&mut t, &e, i, xi);
                let plain = e.utility(i, o.allocation_row(i));
                assert!((t.value(u).item() - plain).abs() <= 1e-12 * (1.0 + plain.abs()), "{:?}", family);
                let b = t.scalar(e.budget(i, &o.prices));
                let d = demand_var(&mut t, &e, i, p, b);
                let plain = e.demand(i, &o.prices, e.budget(i, &o.prices)).unwrap();
                for (a, b) in t.value(d).data().iter().zip(&plain) {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{:?}", family);
                }
            }
            let phi = exploitability_var(&mut t, &e, x, p, OracleGrad::Pathwise);
            let game = ExchangeGame::new(e.clone());
            let plain = exploitability(&game, &o.to_profile()).unwrap().value;
            assert!((t.value(phi).item() - plain).abs() <= 1e-10 * (1.0 + plain.abs()), "{:?}", family);
        }
    }

    #[test]
    fn cumulative_regret_of_exact_deviation_is_exploitability() {
        for (k, family) in Family::ALL.into_iter().enumerate() {
            let e = sample_economy(family, 2, 3, RhoRange::Mixed, 90 + k as u64).unwrap();
            let o = uniform_feasible_outcome(&e, 3);
            let game = ExchangeGame::new(e.clone());
            let ex = exploitability(&game, &o.to_profile()).unwrap();
            let dev: Vec<f64> = ex.best_responses.concat();
            let mut t = Tape::new();
            let a = t.vector(o.to_profile());
            let d = t.vector(dev);
            let psi = cumulative_regret_var(&mut t, &e, a, d);
            assert!((t.value(psi).item() - ex.value).abs() <= 1e-9 * (1.0 + ex.value.abs()), "{:?}", family);
        }
    }
}
