#![allow(dead_code)]

use ladder_core::scalar::{ratio, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `P(τ⁻ = n)` for `n = 1..=n_max` by walking every path until it first
/// reaches `(-∞, 0]`.
pub fn enumerate_tau_minus(pmf: &[(i64, f64)], n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    fn walk(pmf: &[(i64, f64)], pos: i64, weight: f64, n: usize, n_max: usize, out: &mut [f64]) {
        for &(step, p) in pmf {
            let next = pos + step;
            let w = weight * p;
            if next <= 0 {
                out[n + 1] += w;
            } else if n + 1 < n_max {
                walk(pmf, next, w, n + 1, n_max, out);
            }
        }
    }
    walk(pmf, 0, 1.0, 0, n_max, &mut out);
    out
}

/// Same enumeration in exact arithmetic.
pub fn enumerate_tau_minus_exact(pmf: &[(i64, Rational)], n_max: usize) -> Vec<Rational> {
    let zero = ratio(0, 1);
    let mut out = vec![zero; n_max + 1];
    fn walk(
        pmf: &[(i64, Rational)],
        pos: i64,
        weight: &Rational,
        n: usize,
        n_max: usize,
        out: &mut [Rational],
    ) {
        for (step, p) in pmf {
            let next = pos + step;
            let w = weight * p;
            if next <= 0 {
                out[n + 1] += &w;
            } else if n + 1 < n_max {
                walk(pmf, next, &w, n + 1, n_max, out);
            }
        }
    }
    walk(pmf, 0, &ratio(1, 1), 0, n_max, &mut out);
    out
}

/// Random zero-mean law on `{-2, …, 2}` with small integer weights, as
/// `(value, numerator)` pairs over a common denominator.
pub fn random_zero_mean_weights(seed: u64) -> (Vec<(i64, i64)>, i64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m2: i64 = rng.gen_range(1..6);
        let m1: i64 = rng.gen_range(1..10);
        let z: i64 = rng.gen_range(0..10);
        let p2: i64 = rng.gen_range(1..6);
        // 2 m2 + m1 = p1 + 2 p2
        let p1 = 2 * m2 + m1 - 2 * p2;
        if p1 >= 1 {
            let w = vec![(-2, m2), (-1, m1), (0, z), (1, p1), (2, p2)];
            let total = w.iter().map(|x| x.1).sum();
            return (w, total);
        }
    }
}

pub fn random_zero_mean_pmf(seed: u64) -> Vec<(i64, f64)> {
    let (w, total) = random_zero_mean_weights(seed);
    w.iter()
        .map(|&(v, c)| (v, c as f64 / total as f64))
        .collect()
}

pub fn random_zero_mean_rational(seed: u64) -> Vec<(i64, Rational)> {
    let (w, total) = random_zero_mean_weights(seed);
    w.iter().map(|&(v, c)| (v, ratio(c, total))).collect()
}

pub const LAZY: [(i64, f64); 3] = [(-1, 0.25), (0, 0.5), (1, 0.25)];
