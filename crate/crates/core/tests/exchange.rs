use proptest::prelude::*;

use pseudeq_core::exchange::{
    demand, is_competitive_equilibrium, sample_economy, scarf_economy, uniform_feasible_outcome, utility,
    ExchangeEconomy, ExchangeGame, Family, MarketOutcome, RhoRange,
};
use pseudeq_core::pseudogame::exploitability;

/// `argmin |x - y|` over `{x >= 0, p.x <= b}` by bisection on the
/// multiplier of the budget constraint.
fn project_budget(y: &[f64], p: &[f64], b: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { y.iter().zip(p).map(|(yj, pj)| (yj - lam * pj).max(0.0)).collect() };
    let spend = |x: &[f64]| -> f64 { x.iter().zip(p).map(|(a, c)| a * c).sum() };
    if spend(&at(0.0)) <= b {
        return at(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while spend(&at(hi)) > b {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(&at(mid)) > b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Best utility found by projected gradient ascent with numerical
/// gradients from several budget-feasible starts.
fn ascent_oracle(family: Family, v: &[f64], rho: f64, p: &[f64], b: f64) -> f64 {
    let m = v.len();
    let u = |x: &[f64]| utility(family, v, rho, x);
    let starts: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut x = vec![0.0; m];
            x[j] = b / p[j];
            x
        })
        .chain(std::iter::once(p.iter().map(|pj| b / (m as f64 * pj)).collect()))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for mut x in starts {
        for t in 0..400 {
            let g: Vec<f64> = (0..m)
                .map(|k| {
                    let h = 1e-7 * (1.0 + x[k]);
                    let mut up = x.clone();
                    up[k] += h;
                    let mut down = x.clone();
                    down[k] = (down[k] - h).max(0.0);
                    (u(&up) - u(&down)) / (up[k] - down[k])
                })
                .collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let step = 0.5 * b / (norm * (1.0 + t as f64).sqrt());
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a + step * d).collect();
            x = project_budget(&y, p, b);
            best = best.max(u(&x));
        }
    }
    best
}

fn simplex_prices(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Linear), Just(Family::CobbDouglas), Just(Family::Leontief), Just(Family::Ces)]
}

fn rho_for(family: Family, seed: u64) -> RhoRange {
    if family == Family::Ces && seed % 2 == 0 {
        RhoRange::GrossComplements
    } else {
        RhoRange::GrossSubstitutes
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn walras_law_holds(f in family(), seed in any::<u64>(), p in simplex_prices(5)) {
        let e = sample_economy(f, 3, 5, rho_for(f, seed), seed).unwrap();
        let z = e.excess_demand(&p).unwrap();
        let value: f64 = z.iter().zip(&p).map(|(a, b)| a * b).sum();
        prop_assert!(value.abs() <= 1e-8, "p.z = {}", value);
    }

    #[test]
    fn demand_is_homogeneous_of_degree_zero(
        f in family(), seed in any::<u64>(), p in simplex_prices(5), b in 0.1f64..3.0, lam in 0.01f64..100.0,
    ) {
        let e = sample_economy(f, 1, 5, rho_for(f, seed), seed).unwrap();
        let scaled: Vec<f64> = p.iter().map(|x| x * lam).collect();
        let x = e.demand(0, &p, b).unwrap();
        let y = e.demand(0, &scaled, lam * b).unwrap();
        for (a, c) in x.iter().zip(&y) {
            prop_assert!((a - c).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn closed_form_demand_beats_the_ascent_oracle(f in family(), seed in any::<u64>(), p in simplex_prices(4), b in 0.1f64..2.0) {
        let e = sample_economy(f, 1, 4, rho_for(f, seed), seed).unwrap();
        let x = e.demand(0, &p, b).unwrap();
        let spend: f64 = x.iter().zip(&p).map(|(a, c)| a * c).sum();
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!((spend - b).abs() <= 1e-8);
        let oracle = ascent_oracle(f, e.v_row(0), e.rho()[0], &p, b);
        prop_assert!(e.utility(0, &x) >= oracle - 1e-6, "closed form {} oracle {}", e.utility(0, &x), oracle);
    }

    #[test]
    fn ces_at_one_is_linear(v in proptest::collection::vec(0.1f64..1.0, 4), p in simplex_prices(4), b in 0.1f64..2.0) {
        let ratios: Vec<f64> = v.iter().zip(&p).map(|(a, c)| a / c).collect();
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted[3] - sorted[2] > 1e-6);
        let ces = demand(Family::Ces, &v, 1.0, &p, b).unwrap();
        let lin = demand(Family::Linear, &v, 0.5, &p, b).unwrap();
        for (a, c) in ces.iter().zip(&lin) {
            prop_assert!((a - c).abs() <= 1e-12);
        }
    }

    /// CES with weights `v_j^(-rho)` has utility `(sum (x_j / v_j)^rho)^(1/rho)`,
    /// which tends to Leontief as `rho -> -inf`. Its demand divided by the
    /// Leontief demand is `(v_j p_j)^(-s)` over a budget-weighted mean of the
    /// same quantity, `s = 1 / (1 - rho)`, so the relative gap is at most
    /// `exp(s * spread) - 1` with `spread` the range of `ln(v_j p_j)`.
    #[test]
    fn ces_tends_to_leontief(v in proptest::collection::vec(0.1f64..1.0, 4), p in simplex_prices(4), b in 0.1f64..2.0) {
        let rho = -50.0;
        let lmax = v.iter().map(|x| x.ln()).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = v.iter().map(|x| (-rho * (x.ln() - lmax)).exp()).collect();
        let ces = demand(Family::Ces, &w, rho, &p, b).unwrap();
        let leo = demand(Family::Leontief, &v, 0.5, &p, b).unwrap();
        let logs: Vec<f64> = v.iter().zip(&p).map(|(a, c)| (a * c).ln()).collect();
        let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let bound = (spread / (1.0 - rho)).exp_m1();
        for (a, c) in ces.iter().zip(&leo) {
            let rel = (a - c).abs() / c;
            prop_assert!(rel <= bound + 1e-9, "relative gap {} bound {}", rel, bound);
            if spread <= 0.05 {
                prop_assert!(rel <= 1e-3);
            }
        }
    }
}

/// Cobb-Douglas economy with unit supplies and its equilibrium: prices are
/// the fixed point of `p_j = sum_i a_ij (e_i . p)` with budget shares
/// `a_ij`, found by power iteration.
fn cobb_douglas_equilibrium(seed: u64) -> (ExchangeEconomy, MarketOutcome) {
    let raw = sample_economy(Family::CobbDouglas, 3, 4, RhoRange::GrossSubstitutes, seed).unwrap();
    let (n, m) = (3, 4);
    let supply = raw.supply();
    let e: Vec<f64> = (0..n * m).map(|k| raw.endowments()[k] / supply[k % m]).collect();
    let econ = ExchangeEconomy::new(Family::CobbDouglas, n, m, raw.valuations().to_vec(), e, raw.rho().to_vec()).unwrap();
    let shares: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row = econ.v_row(i);
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    let mut p = vec![1.0 / m as f64; m];
    for _ in 0..100_000 {
        let budgets: Vec<f64> = (0..n).map(|i| econ.e_row(i).iter().zip(&p).map(|(a, b)| a * b).sum()).collect();
        let next: Vec<f64> = (0..m).map(|j| (0..n).map(|i| shares[i][j] * budgets[i]).sum()).collect();
        let s: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().map(|x| x / s).collect();
        let moved = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if moved < 1e-16 {
            break;
        }
    }
    let allocation = econ.demands(&p).unwrap();
    (econ, MarketOutcome { prices: p, allocation })
}

#[test]
fn constructed_equilibria_have_zero_exploitability() {
    for seed in 0..30 {
        let (econ, ce) = cobb_douglas_equilibrium(seed);
        let game = ExchangeGame::new(econ.clone());
        let phi = exploitability(&game, &ce.to_profile()).unwrap().value;
        assert!(phi <= 1e-6, "seed {}: exploitability {}", seed, phi);
        assert!(is_competitive_equilibrium(&econ, &ce, 1e-6).unwrap().is_equilibrium());
    }
    let scarf = scarf_economy();
    let p = vec![1.0 / 3.0; 3];
    let ce = MarketOutcome { allocation: scarf.demands(&p).unwrap(), prices: p };
    let phi = exploitability(&ExchangeGame::new(scarf.clone()), &ce.to_profile()).unwrap().value;
    assert!(phi <= 1e-6);
    assert!(is_competitive_equilibrium(&scarf, &ce, 1e-6).unwrap().is_equilibrium());
}

#[test]
fn random_outcomes_are_not_equilibria() {
    for seed in 0..100 {
        let econ = sample_economy(Family::ALL[(seed % 4) as usize], 3, 5, RhoRange::Mixed, seed).unwrap();
        let out = uniform_feasible_outcome(&econ, seed);
        let phi = exploitability(&ExchangeGame::new(econ.clone()), &out.to_profile()).unwrap().value;
        let report = is_competitive_equilibrium(&econ, &out, 1e-6).unwrap();
        assert_eq!(phi <= 1e-6, report.is_equilibrium(), "seed {}: exploitability {}", seed, phi);
        assert!(phi > 1e-6);
    }
}

#[test]
fn perturbed_equilibria_fail_both_tests() {
    for seed in 0..30 {
        let (econ, mut ce) = cobb_douglas_equilibrium(seed);
        ce.prices[0] += 0.05;
        let s: f64 = ce.prices.iter().sum();
        ce.prices.iter_mut().for_each(|p| *p /= s);
        for i in 0..3 {
            let budget = econ.budget(i, &ce.prices);
            let row = &mut ce.allocation[i * 4..(i + 1) * 4];
            let spend: f64 = row.iter().zip(&ce.prices).map(|(a, b)| a * b).sum();
            if spend > budget {
                row.iter_mut().for_each(|x| *x *= budget / spend);
            }
        }
        let phi = exploitability(&ExchangeGame::new(econ.clone()), &ce.to_profile()).unwrap().value;
        assert!(phi > 1e-6);
        assert!(!is_competitive_equilibrium(&econ, &ce, 1e-6).unwrap().is_equilibrium());
    }
}
