//! Small numerical kernels: adaptive Gauss–Kronrod quadrature, bisection,
//! zeta tails and the integer helpers the lattice code needs.

use alloc::vec::Vec;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_bound: f64,
    pub intervals: usize,
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive G7/K15 quadrature of `f` over the finite interval
/// `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = kronrod15(&mut f, a, b);
    let mut pieces: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > tol {
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: total,
                error_bound: err,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let left = kronrod15(&mut f, lo, mid);
        let right = kronrod15(&mut f, mid, hi);
        pieces.push((lo, mid, left.0, left.1));
        pieces.push((mid, hi, right.0, right.1));
        // Re-sum rather than update incrementally so rounding does not drift.
        total = pieces.iter().map(|p| p.2).sum();
        err = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error_bound: err,
            });
        }
    }
    Ok(Quadrature {
        value: total,
        error_bound: err,
        intervals: pieces.len(),
    })
}

/// Quadrature over `[a, ∞)` through the map `t = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: f64,
) -> Result<Quadrature> {
    integrate(
        |u| {
            let w = 1.0 - u;
            let t = a + u / w;
            let v = f(t) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Smallest `x` in `[lo, hi]` (to relative precision ~1e-15) for which the
/// monotone predicate `pred` holds, assuming `pred(hi)` is true.
pub fn bisect_first<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64) -> f64 {
    if pred(lo) {
        return lo;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `Σ_{k ≥ from} k^{-s}` for `s > 1` and `from ≥ 1`, by direct summation up to a
/// cutoff followed by an Euler–Maclaurin tail.
pub fn zeta_tail(s: f64, from: u64) -> f64 {
    let cutoff = from.max(64);
    let mut head = 0.0;
    let mut k = cutoff - 1;
    // Sum small terms first.
    while k >= from {
        head += libm::pow(k as f64, -s);
        if k == 0 {
            break;
        }
        k -= 1;
    }
    let n = cutoff as f64;
    let tail = libm::pow(n, 1.0 - s) / (s - 1.0)
        + 0.5 * libm::pow(n, -s)
        + s / 12.0 * libm::pow(n, -s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * libm::pow(n, -s - 3.0)
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * libm::pow(n, -s - 5.0);
    head + tail
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}
