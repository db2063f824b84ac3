use proptest::prelude::*;

use pseudeq_core::exchange::{sample_economy, uniform_feasible_outcome, ExchangeEconomy, ExchangeGame, Family, MarketOutcome, RhoRange};
use pseudeq_core::kyoto::{sample_kyoto, DamageForm, KyotoGame};
use pseudeq_core::pseudogame::{cumulative_regret, exploitability, DeviationMode};
use pseudeq_core::rng;
use pseudeq_core::solvers::{
    gaes_train, ExchangeProblem, GaesModel, GaesProblem, GradMode, KyotoProblem, NullClock, TrainConfig,
};
use pseudeq_core::Tape;

fn exchange_problems(count: u64, seed: u64) -> Vec<ExchangeProblem> {
    (0..count)
        .map(|k| {
            let f = Family::ALL[(k % 4) as usize];
            ExchangeProblem::new(sample_economy(f, 3, 4, RhoRange::GrossSubstitutes, seed + k).unwrap())
        })
        .collect()
}

/// Batch mean of the exact-deviation cumulative regret on the tape, and of
/// the exploitability computed directly.
fn batch_means<P: GaesProblem>(problems: &[P], profiles: &[Vec<f64>]) -> (f64, f64) {
    let mut tape = Tape::new();
    let mut on_tape = 0.0;
    let mut direct = 0.0;
    for (p, a) in problems.iter().zip(profiles) {
        let av = tape.vector(a.clone());
        let psi = p.exact_cumulative_regret(&mut tape, av, GradMode::Pathwise);
        on_tape += tape.value(psi).item();
        direct += p.exploitability(a).unwrap();
    }
    let n = problems.len() as f64;
    (on_tape / n, direct / n)
}

#[test]
fn exact_deviation_batch_loss_is_mean_exploitability() {
    let problems = exchange_problems(16, 40);
    let mut r = rng::seeded(1);
    let profiles: Vec<Vec<f64>> = problems.iter().map(|p| p.sample_profile(&mut r).unwrap()).collect();
    let (loss, mean) = batch_means(&problems, &profiles);
    assert!((loss - mean).abs() <= 1e-9 * (1.0 + mean.abs()), "loss {} mean {}", loss, mean);

    let games: Vec<KyotoGame> =
        (0..6).map(|s| KyotoGame::new(sample_kyoto(2, s).unwrap(), DeviationMode::Joint, DamageForm::Plain).unwrap()).collect();
    let rows = games.iter().map(|g| g.vertices().len()).max().unwrap();
    let problems: Vec<KyotoProblem> = games.iter().map(|g| KyotoProblem::new(g, rows).unwrap()).collect();
    let profiles: Vec<Vec<f64>> = problems.iter().map(|p| p.sample_profile(&mut r).unwrap()).collect();
    let (loss, mean) = batch_means(&problems, &profiles);
    assert!((loss - mean).abs() <= 1e-9 * (1.0 + mean.abs()), "loss {} mean {}", loss, mean);
}

fn permuted(econ: &ExchangeEconomy, perm: &[usize]) -> ExchangeEconomy {
    let rows = |flat: &[f64], width: usize| -> Vec<f64> {
        perm.iter().flat_map(|&i| flat[i * width..(i + 1) * width].to_vec()).collect()
    };
    let (n, m) = (econ.n_buyers(), econ.m_goods());
    let rho = perm.iter().map(|&i| econ.rho()[i]).collect();
    ExchangeEconomy::new(econ.family(), n, m, rows(econ.valuations(), m), rows(econ.endowments(), m), rho).unwrap()
}

fn permuted_outcome(out: &MarketOutcome, perm: &[usize], m: usize) -> MarketOutcome {
    let allocation = perm.iter().flat_map(|&i| out.allocation[i * m..(i + 1) * m].to_vec()).collect();
    MarketOutcome { prices: out.prices.clone(), allocation }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn relabeling_buyers_leaves_the_loss_unchanged(
        seed in any::<u64>(), fam in 0usize..4, perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let econ = sample_economy(Family::ALL[fam], 3, 4, RhoRange::GrossSubstitutes, seed).unwrap();
        let other = permuted(&econ, &perm);
        let a = uniform_feasible_outcome(&econ, seed ^ 1);
        let mut b = uniform_feasible_outcome(&econ, seed ^ 2);
        // deviations must be affordable at the profile's prices
        for i in 0..3 {
            let budget = econ.budget(i, &a.prices);
            let row = &mut b.allocation[i * 4..(i + 1) * 4];
            let spend: f64 = row.iter().zip(&a.prices).map(|(x, p)| x * p).sum();
            row.iter_mut().for_each(|x| *x *= budget / spend);
        }
        let g1 = ExchangeGame::new(econ);
        let g2 = ExchangeGame::new(other);
        let pa = permuted_outcome(&a, &perm, 4).to_profile();
        let pb = permuted_outcome(&b, &perm, 4).to_profile();
        let e1 = exploitability(&g1, &a.to_profile()).unwrap().value;
        let e2 = exploitability(&g2, &pa).unwrap().value;
        prop_assert!((e1 - e2).abs() <= 1e-10 * (1.0 + e1.abs()));
        let r1 = cumulative_regret(&g1, &a.to_profile(), &b.to_profile()).unwrap();
        let r2 = cumulative_regret(&g2, &pa, &pb).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-10 * (1.0 + r1.abs()));
    }
}

fn short_run(learned: bool) -> (GaesModel, Vec<u64>) {
    let train = exchange_problems(20, 100);
    let valid = exchange_problems(5, 200);
    let config = TrainConfig {
        outer_iters: 30,
        inner_iters: 2,
        warmup_iters: 5,
        batch_size: 4,
        validate_every: 10,
        patience: None,
        seed: 7,
        ..TrainConfig::default()
    };
    let model = GaesModel::new(&train[0], learned, 3).unwrap();
    let out = gaes_train(&train, &valid, model, &config, &NullClock).unwrap();
    let trace = out.trajectory.points().iter().flat_map(|p| [p.exploitability.to_bits(), p.cumulative_regret.to_bits()]).collect();
    (out.model, trace)
}

#[test]
fn identical_seeds_reproduce_training_bit_for_bit() {
    for learned in [false, true] {
        let (m1, t1) = short_run(learned);
        let (m2, t2) = short_run(learned);
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
        let bits = |m: &GaesModel| m.generator.tensors().flat_map(|t| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>();
        assert_eq!(bits(&m1), bits(&m2));
    }
}
