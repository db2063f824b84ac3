//! Pseudo-games, regret and exploitability.
//!
//! A profile is the concatenation of every player's action vector, in player
//! order. A player's feasible deviations either depend on the other players'
//! actions ([`DeviationMode::Individual`], the set `K_i(a_-i)`) or range over
//! the jointly feasible set ([`DeviationMode::Joint`], the deviation set of a
//! variational equilibrium). In joint mode a deviation is described by a whole
//! jointly feasible profile of which player `i` uses block `i`.

mod bimatrix;
mod nonlipschitz;

pub use bimatrix::BimatrixGame;
pub use nonlipschitz::NonLipschitzGame;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::math;
use crate::rng::{self, SeededRng};
use crate::{Error, Result};

/// Constraint values at or above this count as satisfied.
pub const FEASIBILITY_TOL: f64 = -1e-9;

/// Absolute exploitability below which a profile counts as an equilibrium.
pub const GNE_TOL: f64 = 1e-6;

const MAX_REJECTIONS: usize = 100_000;
const MAX_GRID: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeviationMode {
    Individual,
    Joint,
}

pub trait PseudoGame {
    /// Dimension of each player's action.
    fn action_dims(&self) -> Vec<usize>;

    fn n_players(&self) -> usize {
        self.action_dims().len()
    }

    /// Payoff of `player` at `profile`.
    fn payoff(&self, profile: &[f64], player: usize) -> f64;

    /// Constraint values of `player` at `profile`; feasible iff all are >= 0.
    fn constraints(&self, profile: &[f64], player: usize) -> Vec<f64>;

    /// Box bounds per profile coordinate.
    fn bounds(&self) -> Vec<(f64, f64)>;

    /// Maps a profile into the jointly feasible set. Must be idempotent.
    fn project(&self, profile: &[f64]) -> Vec<f64>;

    /// Exact best response of `player` to `profile`, if the game has one.
    fn best_response(&self, _player: usize, _profile: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn deviation_mode(&self) -> DeviationMode {
        DeviationMode::Individual
    }

    /// Jointly feasible profile maximizing the cumulative regret against
    /// `profile`. Used by [`exploitability`] in joint mode, where it is the
    /// maximizer of the Nikaido-Isoda function.
    fn joint_deviation(&self, _profile: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Draws a jointly feasible profile. The default rejection-samples the
    /// box and gives up after 10^5 rejections.
    fn sample_feasible(&self, rng: &mut SeededRng) -> Option<Vec<f64>> {
        let bounds = self.bounds();
        for _ in 0..MAX_REJECTIONS {
            let a: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng::uniform(rng, lo, hi)).collect();
            if jointly_feasible(self, &a) {
                return Some(a);
            }
        }
        None
    }

    /// Gradient of `player`'s payoff with respect to its own block. The
    /// default uses central differences.
    fn own_payoff_gradient(&self, profile: &[f64], player: usize) -> Vec<f64> {
        let offs = offsets(&self.action_dims());
        let (lo, hi) = (offs[player], offs[player + 1]);
        let mut x = profile.to_vec();
        (lo..hi)
            .map(|k| {
                let h = 1e-6 * (1.0 + x[k].abs());
                let orig = x[k];
                x[k] = orig + h;
                let up = self.payoff(&x, player);
                x[k] = orig - h;
                let down = self.payoff(&x, player);
                x[k] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Gradient of the exploitability, when the game knows it in closed
    /// form. Entries may be non-finite where the exploitability is not
    /// differentiable.
    fn exploitability_gradient(&self, _profile: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Start offsets of every block plus the total length.
pub fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len() + 1);
    let mut s = 0;
    out.push(0);
    for d in dims {
        s += d;
        out.push(s);
    }
    out
}

/// Block of `player` inside `profile`.
pub fn block<'a, G: PseudoGame + ?Sized>(game: &G, profile: &'a [f64], player: usize) -> &'a [f64] {
    let offs = offsets(&game.action_dims());
    &profile[offs[player]..offs[player + 1]]
}

/// `a` with block `player` replaced by `b_i`.
pub fn substitute<G: PseudoGame + ?Sized>(game: &G, a: &[f64], player: usize, b_i: &[f64]) -> Vec<f64> {
    let offs = offsets(&game.action_dims());
    let mut out = a.to_vec();
    out[offs[player]..offs[player + 1]].copy_from_slice(b_i);
    out
}

fn check_profile<G: PseudoGame + ?Sized>(game: &G, a: &[f64]) -> Result<()> {
    let total: usize = game.action_dims().iter().sum();
    if a.len() != total {
        return Err(Error::shape(format!("profile has {} coordinates, game needs {}", a.len(), total)));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("profile entry".into()));
    }
    Ok(())
}

fn within_bounds(bounds: &[(f64, f64)], x: &[f64], offset: usize) -> Option<(usize, f64)> {
    for (k, &v) in x.iter().enumerate() {
        let (lo, hi) = bounds[offset + k];
        let slack = (v - lo).min(hi - v);
        if slack < FEASIBILITY_TOL {
            return Some((offset + k, slack));
        }
    }
    None
}

/// Whether every player's constraints and the box hold at `a`.
pub fn jointly_feasible<G: PseudoGame + ?Sized>(game: &G, a: &[f64]) -> bool {
    let bounds = game.bounds();
    within_bounds(&bounds, a, 0).is_none()
        && (0..game.n_players()).all(|i| game.constraints(a, i).iter().all(|&g| g >= FEASIBILITY_TOL))
}

/// Checks that `b` is a feasible deviation profile for `player` against `a`.
/// The error names the violated constraint; box violations are reported
/// with index `usize::MAX`.
pub fn check_deviation<G: PseudoGame + ?Sized>(game: &G, player: usize, a: &[f64], b: &[f64]) -> Result<()> {
    let bounds = game.bounds();
    match game.deviation_mode() {
        DeviationMode::Individual => {
            let offs = offsets(&game.action_dims());
            let b_i = &b[offs[player]..offs[player + 1]];
            if let Some((_, slack)) = within_bounds(&bounds, b_i, offs[player]) {
                return Err(Error::Infeasible { player, index: usize::MAX, value: slack });
            }
            let c = substitute(game, a, player, b_i);
            for (k, g) in game.constraints(&c, player).into_iter().enumerate() {
                if g < FEASIBILITY_TOL {
                    return Err(Error::Infeasible { player, index: k, value: g });
                }
            }
        }
        DeviationMode::Joint => {
            if let Some((_, slack)) = within_bounds(&bounds, b, 0) {
                return Err(Error::Infeasible { player, index: usize::MAX, value: slack });
            }
            let mut base = 0;
            for j in 0..game.n_players() {
                let gs = game.constraints(b, j);
                for (k, &g) in gs.iter().enumerate() {
                    if g < FEASIBILITY_TOL {
                        return Err(Error::Infeasible { player, index: base + k, value: g });
                    }
                }
                base += gs.len();
            }
        }
    }
    Ok(())
}

/// `u_i(b_i, a_-i) - u_i(a)`, after checking that `b` is a feasible
/// deviation for `player` (only block `player` of `b` is used).
pub fn regret<G: PseudoGame + ?Sized>(game: &G, player: usize, a: &[f64], b: &[f64]) -> Result<f64> {
    check_profile(game, a)?;
    check_profile(game, b)?;
    check_deviation(game, player, a, b)?;
    Ok(unchecked_regret(game, player, a, block(game, b, player)))
}

fn unchecked_regret<G: PseudoGame + ?Sized>(game: &G, player: usize, a: &[f64], b_i: &[f64]) -> f64 {
    let dev = substitute(game, a, player, b_i);
    game.payoff(&dev, player) - game.payoff(a, player)
}

/// Sum over players of `regret(game, i, a, b)`.
pub fn cumulative_regret<G: PseudoGame + ?Sized>(game: &G, a: &[f64], b: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..game.n_players() {
        s += regret(game, i, a, b)?;
    }
    Ok(s)
}

/// Per-player regrets of a deviation profile next to the exploitability.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub per_player: Vec<f64>,
    pub cumulative: f64,
    pub exploitability: f64,
}

pub fn regret_report<G: PseudoGame + ?Sized>(game: &G, a: &[f64], b: &[f64]) -> Result<RegretReport> {
    let per_player = (0..game.n_players())
        .map(|i| regret(game, i, a, b))
        .collect::<Result<Vec<_>>>()?;
    let cumulative = per_player.iter().sum();
    let exploitability = exploitability(game, a)?.value;
    Ok(RegretReport { per_player, cumulative, exploitability })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exploitability {
    pub value: f64,
    /// Maximal regret of each player.
    pub per_player: Vec<f64>,
    /// Best responses that attain `per_player`.
    pub best_responses: Vec<Vec<f64>>,
    /// False when the ascent fallback stopped while still improving.
    pub converged: bool,
}

/// Sum over players of the maximal regret over feasible deviations. Uses
/// the game's exact best responses when available and projected gradient
/// ascent otherwise. In joint mode a game supplying
/// [`PseudoGame::joint_deviation`] is scored by the cumulative regret of that
/// single profile.
pub fn exploitability<G: PseudoGame + ?Sized>(game: &G, a: &[f64]) -> Result<Exploitability> {
    check_profile(game, a)?;
    let n = game.n_players();
    if game.deviation_mode() == DeviationMode::Joint {
        if let Some(b) = game.joint_deviation(a) {
            let best_responses: Vec<Vec<f64>> = (0..n).map(|i| block(game, &b, i).to_vec()).collect();
            let per_player: Vec<f64> =
                (0..n).map(|i| unchecked_regret(game, i, a, &best_responses[i])).collect();
            let value = per_player.iter().sum();
            return Ok(Exploitability { value, per_player, best_responses, converged: true });
        }
    }
    let mut per_player = Vec::with_capacity(n);
    let mut best_responses = Vec::with_capacity(n);
    let mut converged = true;
    for i in 0..n {
        let (br, ok) = match game.best_response(i, a) {
            Some(br) => (br, true),
            None => ascent_best_response(game, i, a, 0x5eed ^ i as u64),
        };
        converged &= ok;
        per_player.push(unchecked_regret(game, i, a, &br));
        best_responses.push(br);
    }
    let value = per_player.iter().sum();
    Ok(Exploitability { value, per_player, best_responses, converged })
}

/// Projects a candidate deviation of `player` back into its deviation set.
fn project_deviation<G: PseudoGame + ?Sized>(game: &G, player: usize, a: &[f64], b_i: &[f64]) -> Vec<f64> {
    let offs = offsets(&game.action_dims());
    let (lo, hi) = (offs[player], offs[player + 1]);
    let candidate = substitute(game, a, player, b_i);
    let projected = game.project(&candidate);
    let mut out = projected[lo..hi].to_vec();
    if game.deviation_mode() == DeviationMode::Joint {
        return out;
    }
    let ok = |x: &[f64]| {
        let c = substitute(game, a, player, x);
        game.constraints(&c, player).iter().all(|&g| g >= FEASIBILITY_TOL)
            && within_bounds(&game.bounds(), x, lo).is_none()
    };
    if ok(&out) {
        return out;
    }
    // pull back toward the (feasible) current action
    let a_i = &a[lo..hi];
    let (mut t_lo, mut t_hi) = (0.0, 1.0);
    for _ in 0..60 {
        let t = 0.5 * (t_lo + t_hi);
        let x: Vec<f64> = a_i.iter().zip(&out).map(|(p, q)| p + t * (q - p)).collect();
        if ok(&x) {
            t_lo = t;
        } else {
            t_hi = t;
        }
    }
    out = a_i.iter().zip(&projected[lo..hi]).map(|(p, q)| p + t_lo * (q - p)).collect();
    out
}

/// Projected gradient ascent on one player's payoff: 200 iterations with
/// step 0.1/sqrt(t), five restarts (the first from the current action),
/// best kept. Returns the deviation and whether its projected-gradient
/// residual is below 1e-2.
pub fn ascent_best_response<G: PseudoGame + ?Sized>(
    game: &G,
    player: usize,
    a: &[f64],
    seed: u64,
) -> (Vec<f64>, bool) {
    const ITERS: usize = 200;
    const RESTARTS: usize = 5;
    const STATIONARITY_TOL: f64 = 1e-2;
    let offs = offsets(&game.action_dims());
    let (lo, hi) = (offs[player], offs[player + 1]);
    let bounds = game.bounds();
    let mut rng = rng::seeded(seed);
    let mut best = a[lo..hi].to_vec();
    let mut best_val = game.payoff(a, player);
    let mut best_settled = true;
    for restart in 0..RESTARTS {
        let start: Vec<f64> = if restart == 0 {
            a[lo..hi].to_vec()
        } else {
            (lo..hi).map(|k| rng::uniform(&mut rng, bounds[k].0, bounds[k].1)).collect()
        };
        let mut x = project_deviation(game, player, a, &start);
        for t in 1..=ITERS {
            let prof = substitute(game, a, player, &x);
            let g = game.own_payoff_gradient(&prof, player);
            let step = 0.1 / math::sqrt(t as f64);
            let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
            x = project_deviation(game, player, a, &y);
        }
        let val = game.payoff(&substitute(game, a, player, &x), player);
        if val > best_val {
            best_val = val;
            // stationarity residual of a unit projected-gradient step
            let g = game.own_payoff_gradient(&substitute(game, a, player, &x), player);
            let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + gi).collect();
            best_settled = math::dist2(&project_deviation(game, player, a, &y), &x) <= STATIONARITY_TOL;
            best = x;
        }
    }
    (best, best_settled)
}

/// Exploitability divided by the mean exploitability of `n_samples`
/// jointly feasible profiles drawn by the game's sampler.
pub fn normalized_exploitability<G: PseudoGame + ?Sized>(
    game: &G,
    a: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let denom = mean_sampled_exploitability(game, n_samples, seed)?;
    Ok(exploitability(game, a)?.value / denom)
}

/// Mean exploitability over `n_samples` sampled feasible profiles; errors
/// when it is below 1e-12.
pub fn mean_sampled_exploitability<G: PseudoGame + ?Sized>(game: &G, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = rng::seeded(seed);
    let mut s = 0.0;
    for _ in 0..n_samples {
        let b = game
            .sample_feasible(&mut rng)
            .ok_or_else(|| Error::invalid("feasible sampler gave up"))?;
        s += exploitability(game, &b)?.value;
    }
    let mean = s / n_samples as f64;
    if mean < 1e-12 {
        return Err(Error::Degenerate(mean));
    }
    Ok(mean)
}

/// Lower bound on the exploitability by maximizing every player's regret
/// over a grid of `points_per_dim` values per coordinate of its box. The
/// current action is always part of the grid, and a single grid point means
/// just the current action. Only individual deviations are supported.
pub fn brute_force_exploitability<G: PseudoGame + ?Sized>(
    game: &G,
    a: &[f64],
    points_per_dim: usize,
) -> Result<f64> {
    check_profile(game, a)?;
    if game.deviation_mode() != DeviationMode::Individual {
        return Err(Error::invalid("grid oracle supports individual deviations only"));
    }
    if points_per_dim == 0 {
        return Err(Error::invalid("grid needs at least one point per dimension"));
    }
    let dims = game.action_dims();
    let mut total: usize = 0;
    for &d in &dims {
        let n = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(points_per_dim));
        total = n
            .and_then(|n| total.checked_add(n))
            .filter(|&t| t <= MAX_GRID)
            .ok_or_else(|| Error::invalid(format!("grid exceeds {} points", MAX_GRID)))?;
    }
    let bounds = game.bounds();
    let offs = offsets(&dims);
    let mut sum = 0.0;
    for (i, &d) in dims.iter().enumerate() {
        let mut best = 0.0f64;
        if points_per_dim > 1 {
            let mut idx = vec![0usize; d];
            loop {
                let b_i: Vec<f64> = (0..d)
                    .map(|k| {
                        let (lo, hi) = bounds[offs[i] + k];
                        lo + (hi - lo) * idx[k] as f64 / (points_per_dim - 1) as f64
                    })
                    .collect();
                let c = substitute(game, a, i, &b_i);
                if game.constraints(&c, i).iter().all(|&g| g >= FEASIBILITY_TOL) {
                    best = best.max(game.payoff(&c, i) - game.payoff(a, i));
                }
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < points_per_dim {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        sum += best;
    }
    Ok(sum)
}

/// Adapter so `&dyn PseudoGame` and references can be passed where a
/// sampler needs a concrete RNG type.
pub fn sample_with<G: PseudoGame + ?Sized>(game: &G, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
    let mut r = rng::seeded(rng.next_u64());
    game.sample_feasible(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// One player maximizing `-(x - c)^2` on [0, 1] with no constraints.
    struct Quadratic {
        c: f64,
    }

    impl PseudoGame for Quadratic {
        fn action_dims(&self) -> Vec<usize> {
            vec![1]
        }
        fn payoff(&self, p: &[f64], _: usize) -> f64 {
            -(p[0] - self.c) * (p[0] - self.c)
        }
        fn constraints(&self, _: &[f64], _: usize) -> Vec<f64> {
            Vec::new()
        }
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0)]
        }
        fn project(&self, p: &[f64]) -> Vec<f64> {
            p.iter().map(|v| v.clamp(0.0, 1.0)).collect()
        }
    }

    /// Two independent copies of [`Quadratic`].
    struct Pair(Quadratic, Quadratic);

    impl PseudoGame for Pair {
        fn action_dims(&self) -> Vec<usize> {
            vec![1, 1]
        }
        fn payoff(&self, p: &[f64], i: usize) -> f64 {
            if i == 0 {
                self.0.payoff(&p[..1], 0)
            } else {
                self.1.payoff(&p[1..], 0)
            }
        }
        fn constraints(&self, _: &[f64], _: usize) -> Vec<f64> {
            Vec::new()
        }
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0); 2]
        }
        fn project(&self, p: &[f64]) -> Vec<f64> {
            p.iter().map(|v| v.clamp(0.0, 1.0)).collect()
        }
    }

    #[test]
    fn ascent_fallback_finds_interior_maximum() {
        let g = Quadratic { c: 0.3 };
        let e = exploitability(&g, &[0.9]).unwrap();
        assert!((e.value - 0.36).abs() < 1e-4, "{}", e.value);
        assert!(e.converged);
    }

    #[test]
    fn cumulative_regret_is_additive_over_independent_players() {
        let g = Pair(Quadratic { c: 0.3 }, Quadratic { c: 0.8 });
        let a = [0.5, 0.5];
        let b = [0.2, 0.9];
        let r0 = regret(&g, 0, &a, &b).unwrap();
        let r1 = regret(&g, 1, &a, &b).unwrap();
        let s = cumulative_regret(&g, &a, &b).unwrap();
        assert!((s - (r0 + r1)).abs() < 1e-15);
        assert_eq!(cumulative_regret(&g, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn out_of_box_deviation_is_rejected() {
        let g = Quadratic { c: 0.3 };
        let err = regret(&g, 0, &[0.5], &[1.5]).unwrap_err();
        assert!(matches!(err, Error::Infeasible { player: 0, .. }));
    }

    #[test]
    fn profile_length_is_checked() {
        let g = Quadratic { c: 0.3 };
        assert!(matches!(exploitability(&g, &[0.1, 0.2]), Err(Error::Shape(_))));
    }

    #[test]
    fn grid_with_single_point_is_zero() {
        let g = Pair(Quadratic { c: 0.3 }, Quadratic { c: 0.8 });
        assert_eq!(brute_force_exploitability(&g, &[0.9, 0.1], 1).unwrap(), 0.0);
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let g = Pair(Quadratic { c: 0.3 }, Quadratic { c: 0.8 });
        assert!(brute_force_exploitability(&g, &[0.9, 0.1], 10_000_000).is_err());
    }

    #[test]
    fn degenerate_normalization_is_rejected() {
        struct Constant;
        impl PseudoGame for Constant {
            fn action_dims(&self) -> Vec<usize> {
                vec![1]
            }
            fn payoff(&self, _: &[f64], _: usize) -> f64 {
                1.0
            }
            fn constraints(&self, _: &[f64], _: usize) -> Vec<f64> {
                Vec::new()
            }
            fn bounds(&self) -> Vec<(f64, f64)> {
                vec![(0.0, 1.0)]
            }
            fn project(&self, p: &[f64]) -> Vec<f64> {
                p.to_vec()
            }
        }
        let err = normalized_exploitability(&Constant, &[0.5], 10, 1).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }
}
