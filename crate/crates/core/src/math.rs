//! Float helpers backed by `libm` so results do not depend on the platform
//! `std` implementation.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `1 / sqrt(x)` correctly rounded for `x > 0`. The naive quotient rounds
/// twice; the candidate and its neighbours are compared through the exact
/// residual `c^2 x - 1`.
pub fn recip_sqrt(x: f64) -> f64 {
    let c = 1.0 / sqrt(x);
    let residual = |c: f64| {
        let hi = c * c;
        let lo = libm::fma(c, c, -hi);
        libm::fma(hi, x, -1.0) + lo * x
    };
    let down = f64::from_bits(c.to_bits() - 1);
    let up = f64::from_bits(c.to_bits() + 1);
    let mut best = c;
    for cand in [down, up] {
        if abs(residual(cand)) < abs(residual(best)) {
            best = cand;
        }
    }
    best
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + ln(xs.iter().map(|&x| exp(x - m)).sum::<f64>())
}

/// Index of the largest element, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest element, lowest index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
