use proptest::prelude::*;

use pseudeq_core::pseudogame::{
    brute_force_exploitability, cumulative_regret, exploitability, regret, BimatrixGame, NonLipschitzGame, PseudoGame,
};
use pseudeq_core::rng;

fn payoff_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 2)
}

fn mixed(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

/// A feasible non-Lipschitz profile and a feasible unilateral deviation
/// profile against it.
fn non_lipschitz_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, t, u1, u2)| {
        // a_2 in [a_1^2, sqrt(a_1)] keeps both constraints satisfied
        let lo = x * x;
        let hi = x.sqrt();
        let a = vec![x, lo + t * (hi - lo)];
        let b = vec![u1 * a[1].sqrt(), u2 * a[0].sqrt()];
        (a, b)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exploitability_dominates_cumulative_regret_on_bimatrix_games(
        a in payoff_matrix(), b in payoff_matrix(), x in mixed(2), y in mixed(3), dx in mixed(2), dy in mixed(3),
    ) {
        let g = BimatrixGame::new(&a, &b).unwrap();
        let prof = [x, y].concat();
        let dev = [dx, dy].concat();
        let phi = exploitability(&g, &prof).unwrap().value;
        prop_assert!(phi >= cumulative_regret(&g, &prof, &dev).unwrap() - 1e-12);
        prop_assert_eq!(cumulative_regret(&g, &prof, &prof).unwrap(), 0.0);
    }

    #[test]
    fn exploitability_dominates_cumulative_regret_on_the_non_lipschitz_game((a, b) in non_lipschitz_pair()) {
        let g = NonLipschitzGame::new();
        let phi = exploitability(&g, &a).unwrap().value;
        prop_assert!(phi >= cumulative_regret(&g, &a, &b).unwrap() - 1e-12);
        prop_assert_eq!(cumulative_regret(&g, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn grid_oracle_is_a_refining_lower_bound((a, _) in non_lipschitz_pair()) {
        let g = NonLipschitzGame::new();
        let phi = exploitability(&g, &a).unwrap().value;
        let coarse = brute_force_exploitability(&g, &a, 11).unwrap();
        let fine = brute_force_exploitability(&g, &a, 101).unwrap();
        prop_assert!(coarse <= fine + 1e-12);
        prop_assert!(fine <= phi + 1e-9);
        prop_assert!(phi - fine <= 0.02 + 1e-9);
    }

    #[test]
    fn grid_oracle_bounds_bimatrix_exploitability(a in payoff_matrix(), b in payoff_matrix(), x in mixed(2), y in mixed(3)) {
        let g = BimatrixGame::new(&a, &b).unwrap();
        let prof = [x, y].concat();
        let phi = exploitability(&g, &prof).unwrap().value;
        let fine = brute_force_exploitability(&g, &prof, 21).unwrap();
        // pure strategies lie on the grid, so the bound is attained
        prop_assert!((phi - fine).abs() <= 1e-9);
    }

    #[test]
    fn shifting_one_payoff_leaves_regrets_unchanged(
        a in payoff_matrix(), b in payoff_matrix(), c in -10.0f64..10.0, x in mixed(2), y in mixed(3), dx in mixed(2), dy in mixed(3),
    ) {
        let g = BimatrixGame::new(&a, &b).unwrap();
        let shifted: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
        let h = BimatrixGame::new(&shifted, &b).unwrap();
        let prof = [x, y].concat();
        let dev = [dx, dy].concat();
        for player in 0..2 {
            let r1 = regret(&g, player, &prof, &dev).unwrap();
            let r2 = regret(&h, player, &prof, &dev).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12 * (1.0 + c.abs()));
        }
        let e1 = exploitability(&g, &prof).unwrap().value;
        let e2 = exploitability(&h, &prof).unwrap().value;
        prop_assert!((e1 - e2).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn relabeling_players_preserves_exploitability(a in payoff_matrix(), b in payoff_matrix(), x in mixed(2), y in mixed(3)) {
        let g = BimatrixGame::new(&a, &b).unwrap();
        let swapped = BimatrixGame::new(&transpose(&b), &transpose(&a)).unwrap();
        let e1 = exploitability(&g, &[x.clone(), y.clone()].concat()).unwrap().value;
        let e2 = exploitability(&swapped, &[y, x].concat()).unwrap().value;
        prop_assert!((e1 - e2).abs() <= 1e-12);
    }
}

#[test]
fn matching_pennies_is_invariant_under_relabeling() {
    let a = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
    let b = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let g = BimatrixGame::matching_pennies();
    let swapped_game = BimatrixGame::new(&transpose(&b), &transpose(&a)).unwrap();
    let mut r = rng::seeded(4);
    for _ in 0..50 {
        let prof = g.sample_feasible(&mut r).unwrap();
        let swapped = [prof[2], prof[3], prof[0], prof[1]];
        let e1 = exploitability(&g, &prof).unwrap().value;
        let e2 = exploitability(&swapped_game, &swapped).unwrap().value;
        assert!((e1 - e2).abs() <= 1e-12);
    }
    assert_eq!(exploitability(&g, &[0.5, 0.5, 0.5, 0.5]).unwrap().value, 0.0);
}
