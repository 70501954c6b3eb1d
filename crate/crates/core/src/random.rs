//! Seeded random numbers.
//!
//! Instances are drawn from ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`). Normal
//! deviates use the Box-Muller transform on two uniform draws from `[0, 1)`, so the stream
//! is fully specified by the seed and can be replayed outside Rust.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type FlagRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> FlagRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// One standard normal deviate (cosine branch of Box-Muller).
pub fn normal(rng: &mut FlagRng) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (std::f64::consts::TAU * u2).cos()
}

pub fn uniform(rng: &mut FlagRng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

pub fn normal_vec(rng: &mut FlagRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Row-major fill, so the draw order matches the JSON layout.
pub fn normal_mat(rng: &mut FlagRng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| normal(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix (signs fixed by `R`).
pub fn orthogonal(rng: &mut FlagRng, n: usize) -> DMatrix<f64> {
    let g = normal_mat(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
