//! Seeded random number helpers. Every stochastic routine in the crate takes
//! an explicit seed or generator so runs are reproducible bit for bit.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed and a label, so that
/// per-iteration or per-instance randomness does not depend on how many
/// draws were made before.
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Uniform point on the probability simplex (normalized exponentials).
pub fn simplex<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..dim)
        .map(|_| -math::ln(1.0 - rng.gen::<f64>()))
        .collect();
    let s: f64 = xs.iter().sum();
    for x in &mut xs {
        *x /= s;
    }
    xs
}

/// Normalized uniforms; a cheap non-uniform point on the simplex.
pub fn normalized_uniforms<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + f64::MIN_POSITIVE).collect();
    let s: f64 = xs.iter().sum();
    for x in &mut xs {
        *x /= s;
    }
    xs
}

/// Fisher-Yates shuffle of `0..n`.
pub fn permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
