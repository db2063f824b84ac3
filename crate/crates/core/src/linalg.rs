//! Small dense linear algebra and Euclidean projections.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Solves the square system `a x = b` (row-major `a`, size `n`) by Gaussian
/// elimination with partial pivoting. Returns `None` for (numerically)
/// singular systems.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Euclidean projection onto `{x >= 0, prices . x <= budget}` for strictly
/// positive prices.
pub fn project_budget_set(y: &[f64], prices: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    if math::dot(&clipped, prices) <= budget {
        return clipped;
    }
    let spend = |mu: f64| -> f64 {
        y.iter()
            .zip(prices)
            .map(|(&v, &p)| p * (v - mu * p).max(0.0))
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while spend(hi) > budget {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    y.iter().zip(prices).map(|(&v, &p)| (v - hi * p).max(0.0)).collect()
}

/// Result of a projection onto the convex hull of a point set.
#[derive(Clone, Debug)]
pub struct HullProjection {
    pub point: Vec<f64>,
    /// Convex weights over the input points; they reproduce `point`.
    pub weights: Vec<f64>,
}

/// Projects `target` onto the convex hull of `points` with Wolfe's
/// minimum-norm-point algorithm.
pub fn project_onto_hull(points: &[Vec<f64>], target: &[f64]) -> HullProjection {
    assert!(!points.is_empty(), "hull of no points");
    let d = target.len();
    let shifted: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(target).map(|(a, b)| a - b).collect())
        .collect();
    let scale = shifted.iter().map(|p| math::dot(p, p)).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-12 * scale;

    let start = (0..shifted.len())
        .min_by(|&i, &j| {
            math::dot(&shifted[i], &shifted[i])
                .partial_cmp(&math::dot(&shifted[j], &shifted[j]))
                .unwrap()
        })
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = shifted[start].clone();

    let combine = |active: &[usize], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (&i, &wi) in active.iter().zip(w) {
            for k in 0..d {
                out[k] += wi * shifted[i][k];
            }
        }
        out
    };

    for _major in 0..10 * (shifted.len() + d + 10) {
        let xx = math::dot(&x, &x);
        let (j, xj) = (0..shifted.len())
            .map(|i| (i, math::dot(&x, &shifted[i])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if xj >= xx - tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let k = active.len();
            // affine minimizer over the active points: [G 1; 1^T 0]
            let n = k + 1;
            let mut sys = vec![0.0; n * n];
            for a in 0..k {
                for b in 0..k {
                    sys[a * n + b] = math::dot(&shifted[active[a]], &shifted[active[b]]);
                }
                sys[a * n + k] = 1.0;
                sys[k * n + a] = 1.0;
            }
            let mut rhs = vec![0.0; n];
            rhs[k] = 1.0;
            let alpha = match solve(&sys, &rhs, n) {
                Some(s) => s[..k].to_vec(),
                None => {
                    // affinely dependent: drop the newest point
                    active.pop();
                    lambda.pop();
                    break;
                }
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                x = combine(&active, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (a, l) in alpha.iter().zip(&lambda) {
                if *a <= 1e-14 {
                    let denom = l - a;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let mut keep_a = Vec::with_capacity(k);
            let mut keep_l = Vec::with_capacity(k);
            for (&i, &l) in active.iter().zip(&lambda) {
                if l > 1e-14 {
                    keep_a.push(i);
                    keep_l.push(l);
                }
            }
            if keep_a.is_empty() {
                keep_a.push(active[0]);
                keep_l.push(1.0);
            }
            let s: f64 = keep_l.iter().sum();
            for l in &mut keep_l {
                *l /= s;
            }
            active = keep_a;
            lambda = keep_l;
            x = combine(&active, &lambda);
        }
    }
    let mut weights = vec![0.0; points.len()];
    for (&i, &l) in active.iter().zip(&lambda) {
        weights[i] = l;
    }
    let point = x.iter().zip(target).map(|(a, b)| a + b).collect();
    HullProjection { point, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solve_small_system() {
        let x = solve(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn hull_projection_of_square() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let p = project_onto_hull(&pts, &[2.0, 0.5]);
        assert!((p.point[0] - 1.0).abs() < 1e-12 && (p.point[1] - 0.5).abs() < 1e-12);
        let inside = project_onto_hull(&pts, &[0.25, 0.75]);
        assert!((inside.point[0] - 0.25).abs() < 1e-12 && (inside.point[1] - 0.75).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn simplex_projection_lands_on_simplex(y in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_simplex(&y);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let again = project_simplex(&p);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn budget_projection_is_feasible(
            y in proptest::collection::vec(-2.0f64..4.0, 3),
            p in proptest::collection::vec(0.05f64..1.0, 3),
            b in 0.0f64..2.0,
        ) {
            let x = project_budget_set(&y, &p, b);
            prop_assert!(x.iter().all(|&v| v >= 0.0));
            prop_assert!(math::dot(&x, &p) <= b + 1e-9);
        }

        #[test]
        fn hull_projection_beats_every_vertex(
            pts in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..12),
            t in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let pr = project_onto_hull(&pts, &t);
            let s: f64 = pr.weights.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(pr.weights.iter().all(|&w| w >= -1e-12));
            // optimality: (t - x) . (v - x) <= 0 for every vertex v
            let r: Vec<f64> = t.iter().zip(&pr.point).map(|(a, b)| a - b).collect();
            for v in &pts {
                let dv: Vec<f64> = v.iter().zip(&pr.point).map(|(a, b)| a - b).collect();
                prop_assert!(math::dot(&r, &dv) <= 1e-7 * (1.0 + math::dot(&r, &r)));
            }
        }
    }
}
