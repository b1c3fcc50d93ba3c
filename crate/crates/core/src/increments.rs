//! Increment distributions, their tail structure and the derived constants
//! (positivity index, normalizing sequence, stable density at zero).

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, WeightedAliasIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, gcd};

/// Default support cut for [`ModelKind::LatticePareto`].
pub const DEFAULT_PARETO_TRUNCATION: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    FiniteLattice,
    LatticePareto,
    TwoSidedPareto,
}

/// Serializable description of an increment model.
///
/// This is the form models take in experiment configs; [`IncrementModel`]
/// validates it and precomputes everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// `(value, probability)` pairs for finite lattice models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<(i64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
}

impl ModelSpec {
    pub fn finite_lattice(pmf: &[(i64, f64)]) -> Self {
        ModelSpec {
            kind: ModelKind::FiniteLattice,
            alpha: None,
            p: None,
            q: None,
            pmf: Some(pmf.to_vec()),
            truncation: None,
        }
    }

    pub fn two_sided_pareto(alpha: f64, p: f64) -> Self {
        ModelSpec {
            kind: ModelKind::TwoSidedPareto,
            alpha: Some(alpha),
            p: Some(p),
            q: Some(1.0 - p),
            pmf: None,
            truncation: None,
        }
    }

    pub fn lattice_pareto(alpha: f64, p: f64, truncation: u64) -> Self {
        ModelSpec {
            kind: ModelKind::LatticePareto,
            alpha: Some(alpha),
            p: Some(p),
            q: Some(1.0 - p),
            pmf: None,
            truncation: Some(truncation),
        }
    }

    pub fn build(&self) -> Result<IncrementModel> {
        IncrementModel::from_spec(self)
    }
}

/// Probability mass function on consecutive integers `offset, offset+1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf<T> {
    pub offset: i64,
    pub probs: Vec<T>,
}

impl<T> LatticePmf<T> {
    pub fn min_value(&self) -> i64 {
        self.offset
    }
    pub fn max_value(&self) -> i64 {
        self.offset + self.probs.len() as i64 - 1
    }
}

impl<T: crate::scalar::Scalar> LatticePmf<T> {
    /// Builds a pmf from `(value, probability)` pairs; repeated values add up.
    pub fn from_pairs(pairs: &[(i64, T)]) -> Self {
        let lo = pairs.iter().map(|p| p.0).min().unwrap_or(0);
        let hi = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        let mut probs = alloc::vec![T::zero(); (hi - lo + 1) as usize];
        for (v, w) in pairs {
            let slot = &mut probs[(v - lo) as usize];
            *slot = slot.clone() + w.clone();
        }
        LatticePmf { offset: lo, probs }
    }

    pub fn prob(&self, value: i64) -> T {
        let i = value - self.offset;
        if i < 0 || i >= self.probs.len() as i64 {
            T::zero()
        } else {
            self.probs[i as usize].clone()
        }
    }

    /// The law of `-X`.
    pub fn mirror(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        LatticePmf {
            offset: -self.max_value(),
            probs,
        }
    }
}

#[derive(Debug, Clone)]
struct LatticeLaw {
    pmf: LatticePmf<f64>,
    /// `cdf[i] = P(X ≤ offset + i)` in lattice units.
    cdf: Vec<f64>,
    /// `sf[i] = P(X ≥ offset + i)`.
    sf: Vec<f64>,
}

impl LatticeLaw {
    fn new(pmf: LatticePmf<f64>) -> Self {
        let mut cdf = Vec::with_capacity(pmf.probs.len());
        let mut acc = 0.0;
        for p in &pmf.probs {
            acc += p;
            cdf.push(acc);
        }
        let mut sf = alloc::vec![0.0; pmf.probs.len()];
        let mut acc = 0.0;
        for (i, p) in pmf.probs.iter().enumerate().rev() {
            acc += p;
            sf[i] = acc;
        }
        LatticeLaw { pmf, cdf, sf }
    }

    /// `P(X ≤ k)` for integer `k`.
    fn cdf_at(&self, k: i64) -> f64 {
        let i = k - self.pmf.offset;
        if i < 0 {
            0.0
        } else if i >= self.cdf.len() as i64 {
            1.0
        } else {
            self.cdf[i as usize]
        }
    }

    /// `P(X ≥ k)` for integer `k`.
    fn sf_at(&self, k: i64) -> f64 {
        let i = k - self.pmf.offset;
        if i < 0 {
            1.0
        } else if i >= self.sf.len() as i64 {
            0.0
        } else {
            self.sf[i as usize]
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    Lattice(LatticeLaw),
    Pareto { shift: f64 },
}

/// An increment distribution with its tail metadata.
///
/// Lattice models are stored in lattice units (span rescaled to 1); the
/// real-valued accessors (`cdf`, tails) take arguments in original units.
#[derive(Debug, Clone)]
pub struct IncrementModel {
    spec: ModelSpec,
    kind: ModelKind,
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
    span: f64,
    period: u64,
    law: Law,
}

fn check_alpha_heavy(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) || !alpha.is_finite() {
        return Err(Error::InvalidModel(format!(
            "alpha = {alpha} must lie in (0,1) ∪ (1,2) for Pareto families"
        )));
    }
    if alpha == 1.0 {
        return Err(Error::InvalidModel(
            "alpha = 1 is not supported".to_string(),
        ));
    }
    Ok(())
}

fn tail_weights(spec: &ModelSpec, alpha: f64) -> Result<(f64, f64)> {
    let (p, q) = match (spec.p, spec.q) {
        (Some(p), Some(q)) => {
            if (p + q - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("p + q = {} ≠ 1", p + q)));
            }
            (p, 1.0 - p)
        }
        (Some(p), None) => (p, 1.0 - p),
        (None, Some(q)) => (1.0 - q, q),
        (None, None) => return Err(Error::InvalidModel("tail weight p is required".to_string())),
    };
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidModel(format!("p = {p} outside [0,1]")));
    }
    if alpha < 1.0 && (p == 0.0 || q == 0.0) {
        return Err(Error::Inadmissible(format!(
            "alpha = {alpha} < 1 requires |beta| < 1 (p = {p})"
        )));
    }
    Ok((p, q))
}

impl IncrementModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match spec.kind {
            ModelKind::FiniteLattice => {
                let pairs = spec.pmf.as_ref().ok_or_else(|| {
                    Error::InvalidModel("finite lattice model needs a pmf table".to_string())
                })?;
                Self::finite_lattice_inner(pairs, spec.clone())
            }
            ModelKind::TwoSidedPareto => {
                let alpha = spec
                    .alpha
                    .ok_or_else(|| Error::InvalidModel("alpha is required".to_string()))?;
                check_alpha_heavy(alpha)?;
                let (p, q) = tail_weights(spec, alpha)?;
                let shift = if alpha > 1.0 {
                    -(p - q) / (alpha - 1.0)
                } else {
                    0.0
                };
                Ok(IncrementModel {
                    spec: spec.clone(),
                    kind: ModelKind::TwoSidedPareto,
                    alpha,
                    beta: p - q,
                    p,
                    q,
                    span: 0.0,
                    period: 0,
                    law: Law::Pareto { shift },
                })
            }
            ModelKind::LatticePareto => {
                let alpha = spec
                    .alpha
                    .ok_or_else(|| Error::InvalidModel("alpha is required".to_string()))?;
                check_alpha_heavy(alpha)?;
                let (p, q) = tail_weights(spec, alpha)?;
                let k_tail = spec.truncation.unwrap_or(DEFAULT_PARETO_TRUNCATION);
                if k_tail < 2 {
                    return Err(Error::InvalidModel(
                        "truncation must be at least 2".to_string(),
                    ));
                }
                let pmf = lattice_pareto_pmf(alpha, p, q, k_tail);
                let law = LatticeLaw::new(pmf);
                let mean: f64 = law
                    .pmf
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (law.pmf.offset + i as i64) as f64 * w)
                    .sum();
                if alpha > 1.0 && mean.abs() > 1e-10 {
                    return Err(Error::InvalidModel(format!(
                        "centering failed: mean {mean:e}"
                    )));
                }
                Ok(IncrementModel {
                    spec: spec.clone(),
                    kind: ModelKind::LatticePareto,
                    alpha,
                    beta: p - q,
                    p,
                    q,
                    span: 1.0,
                    period: 1,
                    law: Law::Lattice(law),
                })
            }
        }
    }

    /// Finite lattice model from `(value, probability)` pairs.
    pub fn finite_lattice(pmf: &[(i64, f64)]) -> Result<Self> {
        Self::finite_lattice_inner(pmf, ModelSpec::finite_lattice(pmf))
    }

    fn finite_lattice_inner(pairs: &[(i64, f64)], spec: ModelSpec) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidModel("empty pmf".to_string()));
        }
        if pairs.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidModel(
                "pmf entries must be finite and nonnegative".to_string(),
            ));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("pmf sums to {total}, not 1")));
        }
        let support: Vec<i64> = pairs.iter().filter(|p| p.1 > 0.0).map(|p| p.0).collect();
        if !support.iter().any(|&v| v > 0) || !support.iter().any(|&v| v < 0) {
            return Err(Error::InvalidModel(
                "the walk must be able to move both up and down".to_string(),
            ));
        }
        let mean: f64 = pairs.iter().map(|(v, w)| *v as f64 * w).sum();
        if mean.abs() > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "finite-variance models must be centered, mean = {mean:e}"
            )));
        }
        let span = support.iter().fold(0u64, |g, &v| gcd(g, v.unsigned_abs()));
        let v0 = support[0];
        let period = support
            .iter()
            .fold(0u64, |g, &v| gcd(g, (v - v0).unsigned_abs()))
            / span;
        let h = span as i64;
        let scaled: Vec<(i64, f64)> = pairs
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|(v, w)| (v / h, *w))
            .collect();
        Ok(IncrementModel {
            spec,
            kind: ModelKind::FiniteLattice,
            alpha: 2.0,
            beta: 0.0,
            p: 0.5,
            q: 0.5,
            span: span as f64,
            period,
            law: Law::Lattice(LatticeLaw::new(LatticePmf::from_pairs(&scaled))),
        })
    }

    /// Lazy walk `{-1: 1/4, 0: 1/2, +1: 1/4}`.
    pub fn lazy_walk() -> Self {
        Self::finite_lattice(&[(-1, 0.25), (0, 0.5), (1, 0.25)]).expect("valid pmf")
    }

    /// Simple symmetric ±1 walk (period 2).
    pub fn simple_walk() -> Self {
        Self::finite_lattice(&[(-1, 0.5), (1, 0.5)]).expect("valid pmf")
    }

    pub fn two_sided_pareto(alpha: f64, p: f64) -> Result<Self> {
        ModelSpec::two_sided_pareto(alpha, p).build()
    }

    pub fn lattice_pareto(alpha: f64, p: f64, truncation: u64) -> Result<Self> {
        ModelSpec::lattice_pareto(alpha, p, truncation).build()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }
    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Lattice span `h`, 0 for continuous models.
    pub fn span(&self) -> f64 {
        self.span
    }
    pub fn is_lattice(&self) -> bool {
        matches!(self.law, Law::Lattice(_))
    }

    /// Period `d` of the walk: the support sits in `a + d·hℤ`. Always 1
    /// for aperiodic lattice walks, 0 for continuous models.
    pub fn period(&self) -> u64 {
        self.period
    }

    /// Location shift applied to center a Pareto model (0 when α < 1).
    pub fn shift(&self) -> f64 {
        match self.law {
            Law::Pareto { shift } => shift,
            Law::Lattice(_) => 0.0,
        }
    }

    /// Pmf in lattice units, for lattice models.
    pub fn lattice_pmf(&self) -> Option<&LatticePmf<f64>> {
        match &self.law {
            Law::Lattice(l) => Some(&l.pmf),
            Law::Pareto { .. } => None,
        }
    }

    /// `P(X ≤ k)` and `P(X ≥ k)` in lattice units.
    pub fn lattice_cdf(&self, k: i64) -> f64 {
        match &self.law {
            Law::Lattice(l) => l.cdf_at(k),
            Law::Pareto { .. } => f64::NAN,
        }
    }
    pub fn lattice_sf(&self, k: i64) -> f64 {
        match &self.law {
            Law::Lattice(l) => l.sf_at(k),
            Law::Pareto { .. } => f64::NAN,
        }
    }

    /// The law of `-X`.
    pub fn mirror(&self) -> Self {
        let mut spec = self.spec.clone();
        match self.kind {
            ModelKind::FiniteLattice => {
                let pairs: Vec<(i64, f64)> = spec
                    .pmf
                    .as_ref()
                    .map(|t| t.iter().map(|(v, w)| (-v, *w)).collect())
                    .unwrap_or_default();
                spec.pmf = Some(pairs);
            }
            _ => {
                spec.p = Some(self.q);
                spec.q = Some(self.p);
            }
        }
        Self::from_spec(&spec).expect("mirror of a valid model is valid")
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.law {
            Law::Lattice(l) => l.cdf_at(lattice_floor(x / self.span)),
            Law::Pareto { shift } => {
                let z = x - shift;
                if z <= 0.0 {
                    self.q * libm::pow(1.0 - z, -self.alpha)
                } else {
                    1.0 - self.p * libm::pow(1.0 + z, -self.alpha)
                }
            }
        }
    }

    pub fn tails(&self) -> TailProfile<'_> {
        TailProfile { model: self }
    }

    /// Mean of the increment; 0 for every model with α > 1.
    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Lattice(l) => {
                self.span
                    * l.pmf
                        .probs
                        .iter()
                        .enumerate()
                        .map(|(i, w)| (l.pmf.offset + i as i64) as f64 * w)
                        .sum::<f64>()
            }
            Law::Pareto { shift } => {
                if self.alpha > 1.0 {
                    (self.p - self.q) / (self.alpha - 1.0) + shift
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Variance; infinite for the heavy-tailed families.
    pub fn variance(&self) -> f64 {
        match (&self.law, self.kind) {
            (Law::Lattice(l), ModelKind::FiniteLattice) => {
                let m = self.mean();
                l.pmf
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        let x = (l.pmf.offset + i as i64) as f64 * self.span - m;
                        x * x * w
                    })
                    .sum()
            }
            _ => f64::INFINITY,
        }
    }

    /// Positivity index `ρ` of the stable limit.
    pub fn rho(&self) -> f64 {
        rho_index(self.alpha, self.beta).expect("validated at construction")
    }

    /// Normalizing sequence `c_n`.
    ///
    /// For α < 2 this is `inf{x ≥ 0 : P(|X| > x) ≤ 1/n}` (two-sided tail, by
    /// bisection). For finite variance it is `sqrt(n·Var X)`.
    pub fn normalizing_sequence(&self, n: u64) -> f64 {
        let n = n.max(1);
        if self.alpha >= 2.0 {
            return libm::sqrt(n as f64 * self.variance());
        }
        let level = 1.0 / n as f64;
        let tails = self.tails();
        let mut hi = 1.0;
        while tails.two_sided(hi) > level {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        numeric::bisect_first(|x| tails.two_sided(x) <= level, 0.0, hi)
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }
}

fn lattice_floor(x: f64) -> i64 {
    libm::floor(x + 1e-9) as i64
}

/// `P(X = k) ∝ |k|^{-α-1}` with side weights `p`, `q`; mass beyond the
/// truncation lumped onto `±k_tail`; for α > 1 re-centered by mixing in an
/// atom at `∓1` (side weights unchanged).
fn lattice_pareto_pmf(alpha: f64, p: f64, q: f64, k_tail: u64) -> LatticePmf<f64> {
    let s = alpha + 1.0;
    let zeta = numeric::zeta_tail(s, 1);
    let k = k_tail as usize;
    let mut side = alloc::vec![0.0; k + 1];
    for (j, slot) in side.iter_mut().enumerate().take(k).skip(1) {
        *slot = libm::pow(j as f64, -s) / zeta;
    }
    side[k] = numeric::zeta_tail(s, k_tail) / zeta;
    let mut probs = alloc::vec![0.0; 2 * k + 1];
    for j in 1..=k {
        probs[k + j] = p * side[j];
        probs[k - j] = q * side[j];
    }
    if alpha > 1.0 {
        let mean: f64 = (1..=k)
            .map(|j| j as f64 * (probs[k + j] - probs[k - j]))
            .sum();
        if mean != 0.0 {
            let eps = mean.abs() / (1.0 + mean.abs());
            for w in probs.iter_mut() {
                *w *= 1.0 - eps;
            }
            if mean > 0.0 {
                probs[k - 1] += eps;
            } else {
                probs[k + 1] += eps;
            }
        }
    }
    LatticePmf {
        offset: -(k as i64),
        probs,
    }
}

/// Tail functions of an increment law.
#[derive(Debug, Clone, Copy)]
pub struct TailProfile<'a> {
    model: &'a IncrementModel,
}

impl TailProfile<'_> {
    /// `1 - F(x) = P(X > x)`.
    pub fn right(&self, x: f64) -> f64 {
        let m = self.model;
        match &m.law {
            Law::Lattice(l) => l.sf_at(lattice_floor(x / m.span) + 1),
            Law::Pareto { shift } => {
                let z = x - shift;
                if z >= 0.0 {
                    m.p * libm::pow(1.0 + z, -m.alpha)
                } else {
                    1.0 - m.q * libm::pow(1.0 - z, -m.alpha)
                }
            }
        }
    }

    /// `F(-x) = P(X ≤ -x)`.
    pub fn left(&self, x: f64) -> f64 {
        self.model.cdf(-x)
    }

    /// `1 - F(x) + F(-x)`.
    pub fn two_sided(&self, x: f64) -> f64 {
        self.right(x) + self.left(x)
    }
}

/// Positivity index `ρ = 1/2 + arctan(β tan(πα/2)) / (πα)`.
pub fn rho_index(alpha: f64, beta: f64) -> Result<f64> {
    check_admissible(alpha, beta)?;
    if alpha == 2.0 {
        return Ok(0.5);
    }
    Ok(0.5 + libm::atan(beta * libm::tan(PI * alpha / 2.0)) / (PI * alpha))
}

fn check_admissible(alpha: f64, beta: f64) -> Result<()> {
    let ok = if !(alpha.is_finite() && beta.is_finite()) {
        false
    } else if alpha > 0.0 && alpha < 1.0 {
        beta.abs() < 1.0
    } else if alpha > 1.0 && alpha < 2.0 {
        beta.abs() <= 1.0
    } else {
        alpha == 2.0 && beta == 0.0
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Inadmissible(format!(
            "(alpha, beta) = ({alpha}, {beta})"
        )))
    }
}

/// Density at zero of the stable law with characteristic function
/// `exp{-c|t|^α (1 - iβ sign(t) tan(πα/2))}`, by numerical inversion.
pub fn stable_density_at_zero(alpha: f64, beta: f64, scale_c: f64) -> Result<f64> {
    if alpha == 1.0 || !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Inadmissible(format!("alpha = {alpha}")));
    }
    if !(scale_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale c = {scale_c} must be positive"
        )));
    }
    let skew = scale_c * beta * libm::tan(PI * alpha / 2.0);
    let q = numeric::integrate_to_infinity(
        |t| {
            let ta = libm::pow(t, alpha);
            libm::exp(-scale_c * ta) * libm::cos(skew * ta)
        },
        0.0,
        1e-10 * PI,
    )?;
    Ok(q.value / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoneyCondition {
    pub converges: bool,
    /// `(T, ∫_1^T …)` for `T = 10, 100, …, 10^6`.
    pub partial_integrals: Vec<(f64, f64)>,
}

impl DoneyCondition {
    pub fn partial_integral(&self) -> f64 {
        self.partial_integrals.last().map(|p| p.1).unwrap_or(0.0)
    }
}

/// Evaluates `∫_1^T F(-x) / (x (1 - F(x))) dx` (direction minus) or the
/// mirrored integral, and classifies convergence for the built-in families.
pub fn doney_integral_condition(
    model: &IncrementModel,
    direction: Direction,
) -> Result<DoneyCondition> {
    if !(model.alpha > 1.0 && model.alpha < 2.0) {
        return Err(Error::Inadmissible(format!(
            "integral condition needs 1 < alpha < 2, got {}",
            model.alpha
        )));
    }
    let (num_weight, den_weight) = match direction {
        Direction::Minus => (model.q, model.p),
        Direction::Plus => (model.p, model.q),
    };
    if den_weight == 0.0 {
        return Err(Error::Inadmissible(format!(
            "beta = {} makes the {:?} condition inapplicable",
            model.beta, direction
        )));
    }
    let tails = model.tails();
    let ratio = |x: f64| match direction {
        Direction::Minus => tails.left(x) / tails.right(x),
        Direction::Plus => tails.right(x) / tails.left(x),
    };
    let mut partial_integrals = Vec::new();
    let mut acc = 0.0;
    let mut from = 1.0f64;
    for e in 1..=6 {
        let to = libm::pow(10.0, e as f64);
        acc += if model.is_lattice() {
            // Piecewise constant on (k, k+1); integrate 1/x exactly.
            let mut s = 0.0;
            let mut k = from as i64;
            while (k as f64) < to {
                let mid = k as f64 + 0.5;
                let r = ratio(mid);
                if r > 0.0 {
                    s += r * libm::log((k as f64 + 1.0) / k as f64);
                }
                k += 1;
            }
            s
        } else {
            let (a, b) = (libm::log(from), libm::log(to));
            numeric::integrate(|u| ratio(libm::exp(u)), a, b, 1e-12)?.value
        };
        partial_integrals.push((to, acc));
        from = to;
    }
    Ok(DoneyCondition {
        converges: num_weight == 0.0,
        partial_integrals,
    })
}

/// Variate generator for an increment model: inverse cdf for the Pareto
/// family, alias tables for lattice laws.
#[derive(Debug, Clone)]
pub struct Sampler {
    inner: SamplerInner,
}

#[derive(Debug, Clone)]
enum SamplerInner {
    Alias {
        table: WeightedAliasIndex<f64>,
        values: Vec<f64>,
    },
    Pareto {
        inv_alpha: f64,
        p: f64,
        q: f64,
        shift: f64,
    },
}

impl Sampler {
    fn new(model: &IncrementModel) -> Self {
        let inner = match &model.law {
            Law::Lattice(l) => {
                let mut weights = Vec::new();
                let mut values = Vec::new();
                for (i, w) in l.pmf.probs.iter().enumerate() {
                    if *w > 0.0 {
                        weights.push(*w);
                        values.push((l.pmf.offset + i as i64) as f64 * model.span);
                    }
                }
                SamplerInner::Alias {
                    table: WeightedAliasIndex::new(weights).expect("pmf validated"),
                    values,
                }
            }
            Law::Pareto { shift } => SamplerInner::Pareto {
                inv_alpha: 1.0 / model.alpha,
                p: model.p,
                q: model.q,
                shift: *shift,
            },
        };
        Sampler { inner }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            SamplerInner::Alias { table, values } => values[table.sample(rng)],
            SamplerInner::Pareto {
                inv_alpha,
                p,
                q,
                shift,
            } => {
                let u: f64 = rng.gen();
                let (left, v) = if u < *q {
                    (true, u / q)
                } else {
                    (false, (u - q) / p)
                };
                // v in [0,1); 1 - v in (0,1] keeps the magnitude finite.
                let z = libm::pow(1.0 - v, -inv_alpha) - 1.0;
                if left {
                    shift - z
                } else {
                    shift + z
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        assert_eq!(rho_index(2.0, 0.0).unwrap(), 0.5);
        assert!((rho_index(1.5, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // β = 1, 1 < α < 2 gives ρ = 1 - 1/α.
        for &a in &[1.2, 1.5, 1.9] {
            assert!((rho_index(a, 1.0).unwrap() - (1.0 - 1.0 / a)).abs() < 1e-14);
        }
        assert_eq!(rho_index(0.5, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn rho_rejects_outside_admissible_set() {
        assert!(rho_index(1.0, 0.0).is_err());
        assert!(rho_index(0.5, 1.0).is_err());
        assert!(rho_index(0.5, -1.0).is_err());
        assert!(rho_index(2.0, 0.3).is_err());
        assert!(rho_index(2.5, 0.0).is_err());
    }

    #[test]
    fn normalizing_sequence_examples() {
        let m = IncrementModel::two_sided_pareto(0.5, 0.5).unwrap();
        assert!((m.normalizing_sequence(100) - 9999.0).abs() < 1e-8);
        let lazy = IncrementModel::lazy_walk();
        assert!((lazy.normalizing_sequence(8) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stable_density_examples() {
        let g = stable_density_at_zero(2.0, 0.0, 1.0).unwrap();
        assert!((g - 0.5 / libm::sqrt(PI)).abs() < 1e-10);
        let g = stable_density_at_zero(0.5, 0.0, 1.0).unwrap();
        assert!((g - 2.0 / PI).abs() < 1e-9);
        let a = stable_density_at_zero(1.5, 0.4, 2.0).unwrap();
        let b = stable_density_at_zero(1.5, -0.4, 2.0).unwrap();
        assert_eq!(a, b);
        assert!(stable_density_at_zero(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn doney_condition_examples() {
        let one_sided = IncrementModel::two_sided_pareto(1.5, 1.0).unwrap();
        let c = doney_integral_condition(&one_sided, Direction::Minus).unwrap();
        assert!(c.converges);
        let mixed = IncrementModel::two_sided_pareto(1.5, 0.9).unwrap();
        let c = doney_integral_condition(&mixed, Direction::Minus).unwrap();
        assert!(!c.converges);
        assert!(c.partial_integrals.windows(2).all(|w| w[1].1 >= w[0].1));
        // Harmonic growth ~ (q/p) ln T between the last two decades.
        let (a, b) = (c.partial_integrals[4].1, c.partial_integrals[5].1);
        assert!(((b - a) / libm::log(10.0) - 0.1 / 0.9).abs() < 0.01);
        assert!(doney_integral_condition(&one_sided, Direction::Plus).is_err());
        assert!(doney_integral_condition(&IncrementModel::lazy_walk(), Direction::Minus).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(IncrementModel::finite_lattice(&[(-1, 0.3), (1, 0.7)]).is_err());
        assert!(IncrementModel::finite_lattice(&[(-1, 0.5), (1, 0.6)]).is_err());
        assert!(IncrementModel::finite_lattice(&[(0, 1.0)]).is_err());
        assert!(IncrementModel::two_sided_pareto(1.0, 0.5).is_err());
        assert!(IncrementModel::two_sided_pareto(0.5, 1.0).is_err());
        assert!(IncrementModel::two_sided_pareto(2.0, 0.5).is_err());
        let m = IncrementModel::two_sided_pareto(1.5, 0.8).unwrap();
        assert!(m.mean().abs() < 1e-12);
        assert!((m.beta() - (m.p() - m.q())).abs() == 0.0);
    }

    #[test]
    fn span_and_period() {
        let m = IncrementModel::finite_lattice(&[(-2, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(m.span(), 2.0);
        assert_eq!(m.period(), 2);
        assert_eq!(IncrementModel::lazy_walk().period(), 1);
        assert_eq!(IncrementModel::simple_walk().period(), 2);
        let m = IncrementModel::finite_lattice(&[(-3, 0.25), (0, 0.5), (3, 0.25)]).unwrap();
        assert_eq!(m.span(), 3.0);
        assert_eq!(m.period(), 1);
        assert_eq!(m.cdf(-3.0), 0.25);
        assert_eq!(m.cdf(-0.1), 0.25);
        assert!((m.variance() - 4.5).abs() < 1e-15);
    }

    #[test]
    fn lattice_pareto_is_normalized_and_centered() {
        let m = IncrementModel::lattice_pareto(0.5, 0.5, 10_000).unwrap();
        let pmf = m.lattice_pmf().unwrap();
        let s: f64 = pmf.probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let m = IncrementModel::lattice_pareto(1.5, 0.8, 10_000).unwrap();
        assert!(m.mean().abs() < 1e-10);
        let s: f64 = m.lattice_pmf().unwrap().probs.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        // Tail ratio stays p : q.
        let t = m.tails();
        let r = t.right(100.5) / t.left(100.5);
        assert!((r - 4.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn mirror_flips_skewness() {
        let m = IncrementModel::two_sided_pareto(1.5, 0.8).unwrap();
        let w = m.mirror();
        assert!((w.beta() + m.beta()).abs() < 1e-15);
        assert!((w.cdf(-3.0) - m.tails().right(3.0)).abs() < 1e-14);
    }
}
