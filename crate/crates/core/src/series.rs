//! Truncated power series and the Wiener–Hopf route from sign
//! probabilities `P(S_n ≤ 0)`, `P(S_n > 0)`, `P(S_n = 0)` to the laws of the
//! ladder epochs τ⁻, τ⁺ and T⁻.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficients `a_0, …, a_N` of a generating function truncated at order `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> PowerSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(
            !coeffs.is_empty(),
            "a power series needs at least a constant term"
        );
        PowerSeries { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        PowerSeries {
            coeffs: vec![T::zero(); order + 1],
        }
    }

    /// The constant series `1`.
    pub fn one(order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = T::one();
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient of `z^n`, zero beyond the truncation order.
    pub fn coeff(&self, n: usize) -> T {
        self.coeffs.get(n).cloned().unwrap_or_else(T::zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs: Vec<T> = self.coeffs.iter().take(order + 1).cloned().collect();
        coeffs.resize(order + 1, T::zero());
        PowerSeries { coeffs }
    }

    pub fn scale(&self, c: &T) -> Self {
        PowerSeries {
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// `exp(a)` for a series with zero constant term, via
    /// `n b_n = Σ_{k=1}^{n} k a_k b_{n-k}`.
    pub fn exp(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::InvalidArgument(format!(
                "exp needs a zero constant term, got {:?}",
                self.coeffs[0]
            )));
        }
        let n_max = self.order();
        let weighted: Vec<T> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| T::from_usize(k) * a.clone())
            .collect();
        let mut b = vec![T::zero(); n_max + 1];
        b[0] = T::one();
        for n in 1..=n_max {
            let mut acc = T::zero();
            for k in 1..=n {
                if !weighted[k].is_zero() {
                    acc = acc + weighted[k].clone() * b[n - k].clone();
                }
            }
            b[n] = acc / T::from_usize(n);
        }
        Ok(PowerSeries { coeffs: b })
    }

    /// `log(a)` for a series with constant term 1.
    pub fn log(&self) -> Result<Self> {
        if self.coeffs[0] != T::one() {
            return Err(Error::InvalidArgument(format!(
                "log needs constant term 1, got {:?}",
                self.coeffs[0]
            )));
        }
        Ok(self.log_unit_tail())
    }

    // b = log(a) with a_0 = 1: n b_n = n a_n - Σ_{k=1}^{n-1} k b_k a_{n-k}.
    fn log_unit_tail(&self) -> Self {
        let n_max = self.order();
        let mut b = vec![T::zero(); n_max + 1];
        for n in 1..=n_max {
            let mut acc = T::from_usize(n) * self.coeffs[n].clone();
            for k in 1..n {
                if !self.coeffs[n - k].is_zero() {
                    acc = acc - T::from_usize(k) * b[k].clone() * self.coeffs[n - k].clone();
                }
            }
            b[n] = acc / T::from_usize(n);
        }
        PowerSeries { coeffs: b }
    }
}

impl PowerSeries<f64> {
    /// `log(a)` for a series with positive constant term.
    pub fn log_positive(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if !(a0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log needs a positive constant term, got {a0}"
            )));
        }
        let mut out = self.scale(&(1.0 / a0)).log_unit_tail();
        out.coeffs[0] = libm::log(a0);
        Ok(out)
    }

    /// Sum of all retained coefficients (the value at `z = 1` of the
    /// truncated series).
    pub fn partial_sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

fn truncated_product<T: Scalar>(a: &[T], b: &[T], order: usize) -> Vec<T> {
    let mut out = vec![T::zero(); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

impl<T: Scalar> Add for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn add(self, rhs: Self) -> PowerSeries<T> {
        let order = self.order().min(rhs.order());
        PowerSeries {
            coeffs: (0..=order)
                .map(|n| self.coeffs[n].clone() + rhs.coeffs[n].clone())
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn sub(self, rhs: Self) -> PowerSeries<T> {
        let order = self.order().min(rhs.order());
        PowerSeries {
            coeffs: (0..=order)
                .map(|n| self.coeffs[n].clone() - rhs.coeffs[n].clone())
                .collect(),
        }
    }
}

/// Exact convolution of the truncated inputs, truncated at the smaller order.
impl<T: Scalar> Mul for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn mul(self, rhs: Self) -> PowerSeries<T> {
        let order = self.order().min(rhs.order());
        PowerSeries {
            coeffs: truncated_product(&self.coeffs, &rhs.coeffs, order),
        }
    }
}

/// `exp(a)`; see [`PowerSeries::exp`].
pub fn exp_series<T: Scalar>(a: &PowerSeries<T>) -> Result<PowerSeries<T>> {
    a.exp()
}

/// `log(a)`; see [`PowerSeries::log`].
pub fn log_series<T: Scalar>(a: &PowerSeries<T>) -> Result<PowerSeries<T>> {
    a.log()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignSource {
    Exact,
    MonteCarlo,
    Analytic,
}

/// Sign probabilities of `S_n` for `n = 1..=N`; entry `n-1` holds step `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSequence<T> {
    pub le_zero: Vec<T>,
    pub gt_zero: Vec<T>,
    pub eq_zero: Vec<T>,
    pub source: SignSource,
    /// Per-entry standard error of `P(S_n > 0)` (and of `P(S_n ≤ 0)`) for
    /// Monte Carlo input.
    pub stderr: Option<Vec<f64>>,
}

impl<T: Scalar> SignSequence<T> {
    /// Builds a sequence from `P(S_n > 0)` and `P(S_n = 0)`.
    pub fn from_gt_eq(gt_zero: Vec<T>, eq_zero: Vec<T>, source: SignSource) -> Self {
        let le_zero = gt_zero.iter().map(|g| T::one() - g.clone()).collect();
        SignSequence {
            le_zero,
            gt_zero,
            eq_zero,
            source,
            stderr: None,
        }
    }

    pub fn len(&self) -> usize {
        self.le_zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.le_zero.is_empty()
    }

    /// Checks `le + gt = 1` and `0 ≤ eq ≤ le` to within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.gt_zero.len() != self.len() || self.eq_zero.len() != self.len() {
            return Err(Error::InvalidArgument(
                "sign arrays have different lengths".into(),
            ));
        }
        for n in 0..self.len() {
            let le = self.le_zero[n].to_f64();
            let gt = self.gt_zero[n].to_f64();
            let eq = self.eq_zero[n].to_f64();
            if (le + gt - 1.0).abs() > tol || eq < -tol || eq > le + tol {
                return Err(Error::InvalidArgument(format!(
                    "inconsistent sign probabilities at n = {}: le {le}, gt {gt}, eq {eq}",
                    n + 1
                )));
            }
        }
        Ok(())
    }

    /// Sign probabilities of the reflected walk `-S_n`.
    pub fn mirror(&self) -> Self {
        let le_zero = self
            .gt_zero
            .iter()
            .zip(&self.eq_zero)
            .map(|(g, e)| g.clone() + e.clone())
            .collect();
        let gt_zero = self
            .le_zero
            .iter()
            .zip(&self.eq_zero)
            .map(|(l, e)| l.clone() - e.clone())
            .collect();
        SignSequence {
            le_zero,
            gt_zero,
            eq_zero: self.eq_zero.clone(),
            source: self.source,
            stderr: self.stderr.clone(),
        }
    }

    fn check_len(&self, order: usize) -> Result<()> {
        if self.len() < order {
            return Err(Error::InvalidArgument(format!(
                "sign sequence has {} entries, order {order} requested",
                self.len()
            )));
        }
        Ok(())
    }
}

impl SignSequence<f64> {
    /// Continuous symmetric walk: `P(S_n > 0) = 1/2`, no atoms.
    pub fn symmetric_continuous(order: usize) -> Self {
        SignSequence::from_gt_eq(vec![0.5; order], vec![0.0; order], SignSource::Analytic)
    }

    /// Simple ±1 walk in closed form: `P(S_{2k} = 0) = C(2k,k) 4^{-k}`,
    /// `P(S_n > 0) = (1 - P(S_n = 0)) / 2`.
    pub fn simple_walk(order: usize) -> Self {
        let mut eq = vec![0.0; order];
        let mut u = 1.0;
        for n in 1..=order {
            if n % 2 == 0 {
                u *= (n - 1) as f64 / n as f64;
                eq[n - 1] = u;
            }
        }
        let gt = eq.iter().map(|e| 0.5 * (1.0 - e)).collect();
        SignSequence::from_gt_eq(gt, eq, SignSource::Analytic)
    }
}

/// `Σ_{n=1}^{N} z^n/n · c · x_n` as a power series.
fn log_series_of<T: Scalar>(values: &[T], order: usize, negate: bool) -> PowerSeries<T> {
    let mut coeffs = vec![T::zero(); order + 1];
    for n in 1..=order {
        let v = values[n - 1].clone() / T::from_usize(n);
        coeffs[n] = if negate { -v } else { v };
    }
    PowerSeries::new(coeffs)
}

fn one_minus<T: Scalar>(s: &PowerSeries<T>) -> PowerSeries<T> {
    let coeffs = s
        .coeffs()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            if n == 0 {
                T::one() - c.clone()
            } else {
                -c.clone()
            }
        })
        .collect();
    PowerSeries::new(coeffs)
}

/// `P(τ⁻ = n)`, `n = 0..=N`, from `1 - E z^{τ⁻} = exp{-Σ z^n/n P(S_n ≤ 0)}`.
pub fn tau_minus_pmf<T: Scalar>(signs: &SignSequence<T>, order: usize) -> Result<PowerSeries<T>> {
    signs.check_len(order)?;
    let e = log_series_of(&signs.le_zero, order, true).exp()?;
    Ok(one_minus(&e))
}

/// `P(τ⁺ = n)` from `1 - E z^{τ⁺} = exp{-Σ z^n/n P(S_n > 0)}`.
pub fn tau_plus_pmf<T: Scalar>(signs: &SignSequence<T>, order: usize) -> Result<PowerSeries<T>> {
    signs.check_len(order)?;
    let e = log_series_of(&signs.gt_zero, order, true).exp()?;
    Ok(one_minus(&e))
}

/// `P(τ⁻ > n)` as the coefficients of `exp{Σ z^n/n P(S_n > 0)}`, which is
/// `(1 - E z^{τ⁻}) / (1 - z)` and has only nonnegative terms.
pub fn tau_minus_survival<T: Scalar>(
    signs: &SignSequence<T>,
    order: usize,
) -> Result<PowerSeries<T>> {
    signs.check_len(order)?;
    log_series_of(&signs.gt_zero, order, false).exp()
}

/// `P(τ⁺ > n)` as the coefficients of `exp{Σ z^n/n P(S_n ≤ 0)}`.
pub fn tau_plus_survival<T: Scalar>(
    signs: &SignSequence<T>,
    order: usize,
) -> Result<PowerSeries<T>> {
    signs.check_len(order)?;
    log_series_of(&signs.le_zero, order, false).exp()
}

/// `max_n |[z^n] ((1 - G⁺)(1 - G⁻) - (1 - z))|`.
pub fn factorization_residual(pmf_plus: &PowerSeries<f64>, pmf_minus: &PowerSeries<f64>) -> f64 {
    let order = pmf_plus.order().min(pmf_minus.order());
    let prod = &one_minus(&pmf_plus.truncate(order)) * &one_minus(&pmf_minus.truncate(order));
    prod.coeffs()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let target = match n {
                0 => 1.0,
                1 => -1.0,
                _ => 0.0,
            };
            (c - target).abs()
        })
        .fold(0.0, f64::max)
}

/// Exact counterpart of [`factorization_residual`]: the residual series itself.
pub fn factorization_residual_series<T: Scalar>(
    pmf_plus: &PowerSeries<T>,
    pmf_minus: &PowerSeries<T>,
) -> PowerSeries<T> {
    let order = pmf_plus.order().min(pmf_minus.order());
    let mut prod = &one_minus(&pmf_plus.truncate(order)) * &one_minus(&pmf_minus.truncate(order));
    let mut c = prod.coeffs.clone();
    c[0] = c[0].clone() - T::one();
    if order >= 1 {
        c[1] = c[1].clone() + T::one();
    }
    prod.coeffs = c;
    prod
}

/// `Ω(z) = exp{Σ z^n/n P(S_n = 0)} = Σ ω_k z^k`.
pub fn omega_series<T: Scalar>(signs: &SignSequence<T>, order: usize) -> Result<PowerSeries<T>> {
    signs.check_len(order)?;
    log_series_of(&signs.eq_zero, order, false).exp()
}

/// `P(T⁻ = n) = Σ_{k=1}^{n} P(τ⁻ = k) ω_{n-k} - ω_n` for `n ≥ 1`.
pub fn t_minus_pmf<T: Scalar>(
    tau_minus: &PowerSeries<T>,
    omega: &PowerSeries<T>,
) -> PowerSeries<T> {
    let order = tau_minus.order().min(omega.order());
    let conv = truncated_product(tau_minus.coeffs(), omega.coeffs(), order);
    let mut coeffs = vec![T::zero(); order + 1];
    for n in 1..=order {
        coeffs[n] = conv[n].clone() - omega.coeffs()[n].clone();
    }
    PowerSeries::new(coeffs)
}

/// Distribution of a ladder epoch with optional first-order error bounds
/// propagated from Monte Carlo sign estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEpochLaw {
    /// `pmf[n] = P(τ = n)`, `pmf[0] = 0`.
    pub pmf: Vec<f64>,
    /// `survival[n] = P(τ > n)`.
    pub survival: Vec<f64>,
    pub pmf_err: Option<Vec<f64>>,
    pub survival_err: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    /// Weak descending epoch τ⁻.
    WeakDescending,
    /// Strict ascending epoch τ⁺.
    StrictAscending,
}

impl LadderEpochLaw {
    /// Builds the law of τ⁻ or τ⁺ from a sign sequence.
    ///
    /// For Monte Carlo input the bounds are the exact first-order
    /// propagation `Σ_k |∂x_n/∂a_k| σ_k`: with `a_k` the exponent inputs,
    /// `∂P(τ = n)/∂a_k = -e_{n-k}/k` where `e = exp(-Σ z^k a_k / k)`, and
    /// `∂P(τ > n)/∂a_k = -P(τ > n-k)/k`.
    pub fn from_signs(signs: &SignSequence<f64>, order: usize, epoch: Epoch) -> Result<Self> {
        let (pmf, survival) = match epoch {
            Epoch::WeakDescending => (
                tau_minus_pmf(signs, order)?,
                tau_minus_survival(signs, order)?,
            ),
            Epoch::StrictAscending => (
                tau_plus_pmf(signs, order)?,
                tau_plus_survival(signs, order)?,
            ),
        };
        let mut pmf = pmf.into_coeffs();
        pmf[0] = 0.0;
        let survival = survival.into_coeffs();
        let (pmf_err, survival_err) = match &signs.stderr {
            Some(sigma) => {
                let e: Vec<f64> = pmf
                    .iter()
                    .enumerate()
                    .map(|(n, p)| if n == 0 { 1.0 } else { -p })
                    .collect();
                let weights: Vec<f64> = (1..=order).map(|k| sigma[k - 1] / k as f64).collect();
                let mut pe = vec![0.0; order + 1];
                let mut se = vec![0.0; order + 1];
                for n in 1..=order {
                    let mut a = 0.0;
                    let mut b = 0.0;
                    for k in 1..=n {
                        a += weights[k - 1] * e[n - k].abs();
                        b += weights[k - 1] * survival[n - k];
                    }
                    pe[n] = a;
                    se[n] = b;
                }
                (Some(pe), Some(se))
            }
            None => (None, None),
        };
        Ok(LadderEpochLaw {
            pmf,
            survival,
            pmf_err,
            survival_err,
        })
    }

    pub fn order(&self) -> usize {
        self.pmf.len() - 1
    }
}
