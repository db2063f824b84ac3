//! Halfspace polytopes: vertex enumeration, slices and uniform sampling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg;
use crate::math;
use crate::rng::{self, SeededRng};
use crate::{Error, Result};

/// Largest dimension accepted by [`enumerate_vertices`].
pub const MAX_ENUM_DIM: usize = 8;

/// Vertices closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-7;

/// `{x : A x <= b}` with `A` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspaces {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Halfspaces {
    pub fn new(dim: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() * dim {
            return Err(Error::shape(format!("{} coefficients for {} rows of width {}", a.len(), b.len(), dim)));
        }
        Ok(Halfspaces { dim, a, b })
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.dim..(r + 1) * self.dim]
    }

    /// `b - A x`, nonnegative iff `x` is inside.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|r| self.b[r] - math::dot(self.row(r), x)).collect()
    }

    /// Largest violation `max(A x - b)`, or a nonpositive number when inside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.slack(x).into_iter().map(|s| -s).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds the rows `x_k <= cap`.
    pub fn with_upper_box(&self, cap: f64) -> Self {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for k in 0..self.dim {
            let mut row = vec![0.0; self.dim];
            row[k] = 1.0;
            a.extend(row);
            b.push(cap);
        }
        Halfspaces { dim: self.dim, a, b }
    }

    /// The slice obtained by fixing every coordinate outside `free` to the
    /// value it has in `point`. Rows that no longer involve a free
    /// coordinate are dropped.
    pub fn slice(&self, free: &[usize], point: &[f64]) -> Self {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for r in 0..self.rows() {
            let row = self.row(r);
            if free.iter().all(|&k| row[k] == 0.0) {
                continue;
            }
            let fixed: f64 = (0..self.dim).filter(|k| !free.contains(k)).map(|k| row[k] * point[k]).sum();
            a.extend(free.iter().map(|&k| row[k]));
            b.push(self.b[r] - fixed);
        }
        Halfspaces { dim: free.len(), a, b }
    }

    fn scale(&self) -> f64 {
        self.b.iter().fold(1.0f64, |s, v| s.max(v.abs()))
    }
}

/// Vertices of a bounded polytope together with the halfspaces (including
/// any box rows) that define it.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeVertices {
    pub vertices: Vec<Vec<f64>>,
    pub halfspaces: Halfspaces,
    /// Whether some vertex lies on a box face, i.e. the box cut the set.
    pub box_active: bool,
}

/// Every vertex of `{A x <= b, x <= box_cap}` by exhaustive enumeration of
/// square subsystems. Coordinates within `1e-12 * scale` of zero are
/// snapped to zero.
pub fn enumerate_vertices(h: &Halfspaces, box_cap: f64) -> Result<PolytopeVertices> {
    let dim = h.dim;
    if dim == 0 || dim > MAX_ENUM_DIM {
        return Err(Error::invalid(format!("vertex enumeration supports dimensions 1..={}, got {}", MAX_ENUM_DIM, dim)));
    }
    if !(box_cap.is_finite() && box_cap > 0.0) {
        return Err(Error::invalid(format!("box cap {} must be positive", box_cap)));
    }
    let boxed = h.with_upper_box(box_cap);
    let rows = boxed.rows();
    let scale = boxed.scale();
    let feas_tol = 1e-10 * scale;
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut box_active = false;
    let mut idx: Vec<usize> = (0..dim).collect();
    if rows < dim {
        return Ok(PolytopeVertices { vertices, halfspaces: boxed, box_active });
    }
    loop {
        let mut sys = Vec::with_capacity(dim * dim);
        let mut rhs = Vec::with_capacity(dim);
        for &r in &idx {
            sys.extend_from_slice(boxed.row(r));
            rhs.push(boxed.b[r]);
        }
        if let Some(mut x) = linalg::solve(&sys, &rhs, dim) {
            for v in &mut x {
                if v.abs() <= 1e-12 * scale {
                    *v = 0.0;
                }
            }
            if x.iter().all(|v| v.is_finite()) && boxed.violation(&x) <= feas_tol {
                if !vertices.iter().any(|w| math::dist2(w, &x) <= DEDUP_TOL) {
                    if idx.iter().any(|&r| r >= h.rows()) {
                        box_active = true;
                    }
                    vertices.push(x);
                } else if idx.iter().any(|&r| r >= h.rows()) {
                    // a duplicate reached through a box row still touches the box
                    let tight_box = (h.rows()..rows).any(|r| (boxed.b[r] - math::dot(boxed.row(r), &x)).abs() <= feas_tol);
                    box_active |= tight_box;
                }
            }
        }
        // next combination
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(PolytopeVertices { vertices, halfspaces: boxed, box_active });
            }
            k -= 1;
            if idx[k] < rows - dim + k {
                idx[k] += 1;
                for l in k + 1..dim {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Mean of the vertices.
pub fn centroid(vertices: &[Vec<f64>]) -> Vec<f64> {
    let dim = vertices[0].len();
    let mut c = vec![0.0; dim];
    for v in vertices {
        for k in 0..dim {
            c[k] += v[k];
        }
    }
    for x in &mut c {
        *x /= vertices.len() as f64;
    }
    c
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    math::sqrt(-2.0 * math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Hit-and-run sampler over a bounded polytope with a nonempty interior.
#[derive(Clone, Debug)]
pub struct HitAndRun {
    halfspaces: Halfspaces,
    start: Vec<f64>,
    steps: usize,
}

impl HitAndRun {
    /// Chains start at `start`, which must be strictly inside, and run
    /// `steps` moves per sample.
    pub fn new(halfspaces: Halfspaces, start: Vec<f64>, steps: usize) -> Self {
        HitAndRun { halfspaces, start, steps }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Vec<f64> {
        let h = &self.halfspaces;
        let mut x = self.start.clone();
        for _ in 0..self.steps {
            let d: Vec<f64> = (0..h.dim).map(|_| gaussian(rng)).collect();
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for r in 0..h.rows() {
                let ad = math::dot(h.row(r), &d);
                let s = h.b[r] - math::dot(h.row(r), &x);
                if ad > 1e-15 {
                    hi = hi.min(s / ad);
                } else if ad < -1e-15 {
                    lo = lo.max(s / ad);
                }
            }
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                continue;
            }
            let t = rng::uniform(rng, lo.min(0.0), hi.max(0.0));
            for k in 0..h.dim {
                x[k] += t * d[k];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Halfspaces {
        Halfspaces::new(2, vec![-1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn square_has_four_vertices() {
        let p = enumerate_vertices(&unit_square(), 10.0).unwrap();
        assert_eq!(
            sorted(p.vertices),
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
        );
        assert!(!p.box_active);
    }

    #[test]
    fn triangle_has_three_vertices() {
        let h = Halfspaces::new(2, vec![-1.0, 0.0, 0.0, -1.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let p = enumerate_vertices(&h, 10.0).unwrap();
        assert_eq!(sorted(p.vertices), vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn unbounded_set_is_cut_by_the_box() {
        // x >= 0, y >= 0, y <= x
        let h = Halfspaces::new(2, vec![-1.0, 0.0, 0.0, -1.0, -1.0, 1.0], vec![0.0, 0.0, 0.0]).unwrap();
        let p = enumerate_vertices(&h, 2.0).unwrap();
        assert!(p.box_active);
        assert_eq!(sorted(p.vertices), vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0]]);
    }

    #[test]
    fn oversized_dimension_is_rejected() {
        let h = Halfspaces::new(9, vec![0.0; 9], vec![1.0]).unwrap();
        assert!(enumerate_vertices(&h, 1.0).is_err());
    }

    #[test]
    fn slice_fixes_coordinates() {
        // x + y <= 1 sliced at y = 0.25 gives x <= 0.75
        let h = Halfspaces::new(2, vec![1.0, 1.0, -1.0, 0.0], vec![1.0, 0.0]).unwrap();
        let s = h.slice(&[0], &[0.0, 0.25]);
        assert_eq!(s.dim, 1);
        assert_eq!(s.b, vec![0.75, 0.0]);
    }

    #[test]
    fn hit_and_run_stays_inside_and_covers_the_square() {
        let h = unit_square();
        let sampler = HitAndRun::new(h.clone(), vec![0.5, 0.5], 30);
        let mut rng = rng::seeded(5);
        let mut mean = [0.0; 2];
        let n = 2000;
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            assert!(h.violation(&x) <= 1e-12);
            mean[0] += x[0] / n as f64;
            mean[1] += x[1] / n as f64;
        }
        assert!((mean[0] - 0.5).abs() < 0.03 && (mean[1] - 0.5).abs() < 0.03, "{:?}", mean);
    }
}
