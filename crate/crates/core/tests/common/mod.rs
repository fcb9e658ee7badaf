//! Shared helpers for the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use graphon_core::finfield::prime_power_decompose;
use graphon_core::{Matrix, StepKernel};

/// Positive measures summing to one.
pub fn random_measures(rng: &mut ChaCha8Rng, steps: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_kernel(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> StepKernel {
    let rm = random_measures(rng, rows);
    let cm = random_measures(rng, cols);
    let values = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi));
    StepKernel::new(rm, cm, values).unwrap()
}

/// Random kernel with values in [0, 1].
pub fn random_graphon(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> StepKernel {
    random_kernel(rng, rows, cols, 0.0, 1.0)
}

/// Random kernel with values in [-1, 1].
pub fn random_w1(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> StepKernel {
    random_kernel(rng, rows, cols, -1.0, 1.0)
}

/// Least-squares slope of y against x.
pub fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

/// All prime powers in the inclusive range.
pub fn prime_powers(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi)
        .filter(|&q| prime_power_decompose(q).is_some())
        .collect()
}

/// All odd prime powers in the inclusive range.
pub fn odd_prime_powers(lo: u64, hi: u64) -> Vec<u64> {
    prime_powers(lo, hi).into_iter().filter(|q| q % 2 == 1).collect()
}
