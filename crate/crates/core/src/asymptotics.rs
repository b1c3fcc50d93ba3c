//! Report builders that set exact or Monte Carlo quantities against their
//! limit laws and decide pass or fail against a declared tolerance.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{IncrementModel, ModelSpec};
use crate::lattice::{KilledWalkTable, RenewalTable};
use crate::montecarlo::LadderCounts;
use crate::numeric::ols_slope;
use crate::series::{LadderEpochLaw, SignSequence};

/// Stable identifiers for the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    Main,
    MainPrime,
    OmegaRatio,
    SmallDev,
    Renewal,
    Spitzer,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::Main,
        TheoremId::MainPrime,
        TheoremId::OmegaRatio,
        TheoremId::SmallDev,
        TheoremId::Renewal,
        TheoremId::Spitzer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::Main => "main",
            TheoremId::MainPrime => "main-prime",
            TheoremId::OmegaRatio => "omega-ratio",
            TheoremId::SmallDev => "small-dev",
            TheoremId::Renewal => "renewal",
            TheoremId::Spitzer => "spitzer",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Insufficient,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceKind {
    /// `|measured / predicted - 1| ≤ tol`.
    Relative,
    /// `|measured - predicted| ≤ tol`.
    Absolute,
}

/// Tolerance as a step function of `n`, nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule {
    pub kind: ToleranceKind,
    /// `(from_n, tol)` with increasing `from_n`.
    pub steps: Vec<(u64, f64)>,
}

impl ToleranceSchedule {
    pub fn constant(kind: ToleranceKind, tol: f64) -> Self {
        ToleranceSchedule {
            kind,
            steps: alloc::vec![(0, tol)],
        }
    }

    /// Exact lattice oracles: 2% from n = 2000 on, looser below.
    pub fn exact_lattice() -> Self {
        ToleranceSchedule {
            kind: ToleranceKind::Relative,
            steps: alloc::vec![(0, 0.10), (500, 0.05), (1000, 0.03), (2000, 0.02)],
        }
    }

    /// Routes fed by Monte Carlo estimates.
    pub fn monte_carlo() -> Self {
        Self::constant(ToleranceKind::Relative, 0.10)
    }

    pub fn tol(&self, n: u64) -> f64 {
        self.steps
            .iter()
            .rev()
            .find(|s| s.0 <= n)
            .or_else(|| self.steps.first())
            .map(|s| s.1)
            .unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = !self.steps.is_empty()
            && self
                .steps
                .windows(2)
                .all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1)
            && self.steps.iter().all(|s| s.1 >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "tolerance schedule must be nonincreasing in n".into(),
            ))
        }
    }

    fn accepts(&self, n: u64, measured: f64, predicted: f64) -> bool {
        let tol = self.tol(n);
        match self.kind {
            ToleranceKind::Relative => (measured / predicted - 1.0).abs() <= tol,
            ToleranceKind::Absolute => (measured - predicted).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictRule {
    /// Decided by the row with the largest `n`.
    LargestN,
    /// Every row must pass and `max/min` of the measured column must not
    /// exceed `1 + tol`.
    AllRowsFlat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Unsmoothed counterpart of `measured` where one exists (periodic
    /// walks, Cesàro means).
    pub literal: Option<f64>,
}

/// Empirically calibrated stable constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    /// `c_n P(S_n = 0) / h`, the local limit estimate of `g_{α,β}(0)`.
    pub g0_hat: f64,
    /// `c_n / sqrt(n)`.
    pub cn_scale: f64,
    pub n: u64,
    pub provenance: String,
}

/// `ĝ0 = c_n P(S_n = 0) / h` from the unconditioned walk at step `n`.
pub fn calibrate(model: &IncrementModel, n: u64, prob_zero: f64) -> Result<CalibrationConstants> {
    if !model.is_lattice() {
        return Err(Error::InvalidModel(
            "calibration needs a lattice model".into(),
        ));
    }
    let c_n = model.normalizing_sequence(n);
    let g0_hat = c_n * prob_zero / model.span();
    if !(g0_hat > 0.0) {
        return Err(Error::Degenerate(format!(
            "P(S_{n} = 0) = {prob_zero} gives no calibration"
        )));
    }
    Ok(CalibrationConstants {
        g0_hat,
        cn_scale: c_n / libm::sqrt(n as f64),
        n,
        provenance: format!("c_n P(S_n = 0) / h at n = {n}"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub theorem: TheoremId,
    pub model: Option<ModelSpec>,
    pub rows: Vec<ReportRow>,
    pub schedule: ToleranceSchedule,
    pub rule: VerdictRule,
    pub verdict: Verdict,
    pub calibration: Option<CalibrationConstants>,
    /// Window length used for local probabilities (the walk's period).
    pub period: u64,
    pub metadata: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl AsymptoticReport {
    fn new(
        theorem: TheoremId,
        schedule: ToleranceSchedule,
        rule: VerdictRule,
        period: u64,
    ) -> Self {
        AsymptoticReport {
            theorem,
            model: None,
            rows: Vec::new(),
            schedule,
            rule,
            verdict: Verdict::Insufficient,
            calibration: None,
            period,
            metadata: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_model(mut self, spec: &ModelSpec) -> Self {
        self.model = Some(spec.clone());
        self
    }

    fn push_row(
        &mut self,
        n: u64,
        measured: f64,
        predicted: f64,
        ci: (f64, f64),
        literal: Option<f64>,
    ) {
        let pass = self.schedule.accepts(n, measured, predicted);
        self.rows.push(ReportRow {
            n,
            measured,
            predicted,
            ratio: measured / predicted,
            ci_lo: ci.0,
            ci_hi: ci.1,
            tolerance: self.schedule.tol(n),
            pass,
            literal,
        });
    }

    /// Recomputes the verdict from the rows.
    pub fn decide(&mut self) {
        self.verdict = verdict_of(&self.rows, &self.schedule, self.rule);
    }

    /// The largest-`n` row.
    pub fn last(&self) -> Option<&ReportRow> {
        self.rows.iter().max_by_key(|r| r.n)
    }

    /// `max/min` of the measured column.
    pub fn spread(&self) -> f64 {
        let max = self
            .rows
            .iter()
            .map(|r| r.measured)
            .fold(f64::MIN, f64::max);
        let min = self
            .rows
            .iter()
            .map(|r| r.measured)
            .fold(f64::MAX, f64::min);
        max / min
    }
}

/// The verdict as a pure function of rows, schedule and rule.
pub fn verdict_of(rows: &[ReportRow], schedule: &ToleranceSchedule, rule: VerdictRule) -> Verdict {
    if rows.is_empty() {
        return Verdict::Insufficient;
    }
    let ok = match rule {
        VerdictRule::LargestN => {
            let last = rows.iter().max_by_key(|r| r.n).expect("nonempty");
            schedule.accepts(last.n, last.measured, last.predicted)
        }
        VerdictRule::AllRowsFlat => {
            let max = rows.iter().map(|r| r.measured).fold(f64::MIN, f64::max);
            let min = rows.iter().map(|r| r.measured).fold(f64::MAX, f64::min);
            let tol = rows
                .iter()
                .map(|r| schedule.tol(r.n))
                .fold(f64::MAX, f64::min);
            max / min <= 1.0 + tol
                && rows
                    .iter()
                    .all(|r| schedule.accepts(r.n, r.measured, r.predicted))
        }
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl fmt::Display for AsymptoticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}] verdict: {:?}", self.theorem, self.verdict)?;
        writeln!(
            f,
            "{:>8} {:>14} {:>14} {:>10} {:>14} {:>14} {:>7}",
            "n", "measured", "predicted", "ratio", "ci_lo", "ci_hi", "tol"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8} {:>14.8} {:>14.8} {:>10.6} {:>14.8} {:>14.8} {:>7.4}{}",
                r.n,
                r.measured,
                r.predicted,
                r.ratio,
                r.ci_lo,
                r.ci_hi,
                r.tolerance,
                if r.pass { "" } else { "  *" }
            )?;
        }
        for (k, v) in &self.metadata {
            writeln!(f, "  {k} = {v}")?;
        }
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Ladder epoch laws from the other modules

/// `P(τ⁻ = ·)` and `P(τ⁻ > ·)` from a killed-walk table.
pub fn epoch_law_from_table(t: &KilledWalkTable<f64>) -> LadderEpochLaw {
    LadderEpochLaw {
        pmf: t.pmf.clone(),
        survival: t.survival.clone(),
        pmf_err: None,
        survival_err: None,
    }
}

/// Monte Carlo laws of `τ⁻` (`plus = false`) or `τ⁺`, with binomial
/// standard errors as error bounds.
pub fn epoch_law_from_counts(c: &LadderCounts, plus: bool) -> LadderEpochLaw {
    let h = c.horizon as usize;
    let mut pmf = alloc::vec![0.0; h + 1];
    let mut survival = alloc::vec![1.0; h + 1];
    let mut pe = alloc::vec![0.0; h + 1];
    let mut se = alloc::vec![0.0; h + 1];
    for n in 1..=h {
        let (p, s) = if plus {
            (c.tau_plus_at(n), c.tau_plus_survival(n))
        } else {
            (c.tau_minus_at(n), c.tau_minus_survival(n))
        };
        pmf[n] = p.estimate();
        pe[n] = p.stderr();
        survival[n] = s.estimate();
        se[n] = s.stderr();
    }
    LadderEpochLaw {
        pmf,
        survival,
        pmf_err: Some(pe),
        survival_err: Some(se),
    }
}

// ---------------------------------------------------------------------------
// Local laws for τ⁻ and τ⁺

/// Smallest survival probability a row may divide by.
pub const SURVIVAL_FLOOR: f64 = 1e-300;

fn local_law(
    theorem: TheoremId,
    law: &LadderEpochLaw,
    target: f64,
    grid: &[u64],
    schedule: ToleranceSchedule,
    period: u64,
    exponent: f64,
) -> AsymptoticReport {
    let d = period.max(1);
    let mut rep = AsymptoticReport::new(theorem, schedule, VerdictRule::LargestN, d);
    let order = law.order() as u64;
    for &n in grid {
        if n == 0 || n + d - 1 > order {
            rep.notes
                .push(format!("n = {n} dropped: beyond order {order}"));
            continue;
        }
        let s = law.survival[n as usize];
        if !(s > SURVIVAL_FLOOR) {
            rep.notes.push(format!(
                "n = {n} dropped: survival {s:e} below the numeric floor"
            ));
            continue;
        }
        let window = (n..n + d).map(|m| m as usize);
        let p: f64 = window.clone().map(|m| law.pmf[m]).sum::<f64>() / d as f64;
        let nf = n as f64;
        let measured = nf * p / s;
        let ci = match (&law.pmf_err, &law.survival_err) {
            (Some(pe), Some(se)) => {
                let dp: f64 = window.map(|m| pe[m]).sum::<f64>() / d as f64;
                let ds = se[n as usize];
                let lo = nf * (p - dp).max(0.0) / (s + ds);
                let hi = if s > ds {
                    nf * (p + dp) / (s - ds)
                } else {
                    f64::INFINITY
                };
                (lo, hi)
            }
            _ => (measured, measured),
        };
        let literal = nf * law.pmf[n as usize] / s;
        rep.push_row(n, measured, target, ci, Some(literal));
        // Empirical slowly varying factor n^{1-ρ} P(τ > n) (exponent = 1 - ρ or ρ).
        rep.metadata
            .insert(format!("l_hat({n})"), libm::pow(nf, exponent) * s);
    }
    rep.decide();
    rep
}

/// Checks `n P(τ⁻ = n) / P(τ⁻ > n) → 1 - ρ` on `grid`.
///
/// For a walk of period `d > 1`, `P(τ⁻ = n)` is replaced by its average
/// over `n..n+d-1`; the raw ratio is kept in [`ReportRow::literal`].
pub fn verify_local_law_minus(
    law: &LadderEpochLaw,
    rho: f64,
    grid: &[u64],
    schedule: ToleranceSchedule,
    period: u64,
) -> AsymptoticReport {
    local_law(
        TheoremId::Main,
        law,
        1.0 - rho,
        grid,
        schedule,
        period,
        1.0 - rho,
    )
}

/// Checks `n P(τ⁺ = n) / P(τ⁺ > n) → ρ`.
pub fn verify_local_law_plus(
    law: &LadderEpochLaw,
    rho: f64,
    grid: &[u64],
    schedule: ToleranceSchedule,
    period: u64,
) -> AsymptoticReport {
    local_law(TheoremId::MainPrime, law, rho, grid, schedule, period, rho)
}

// ---------------------------------------------------------------------------
// Ω(1) ratio

/// `Ω(1)` with the route that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSum {
    pub value: f64,
    /// `Σ_{k ≤ K} ω_k`.
    pub partial_sum: f64,
    /// Estimate of `Σ_{k > K} ω_k` from `ω_k ≈ C k^{-3/2}`.
    pub tail_estimate: f64,
    pub route: String,
}

impl OmegaSum {
    /// Combines an independently computed `Ω(1)` with partial sums of `ω`.
    /// Errors when the two disagree beyond the tail estimate plus `slack`.
    pub fn cross_checked(
        value: f64,
        omega: &[f64],
        period: u64,
        route: &str,
        slack: f64,
    ) -> Result<Self> {
        let k = omega.len() - 1;
        let partial: f64 = omega.iter().sum();
        let d = period.max(1) as usize;
        let window: f64 = omega[k + 1 - d..].iter().sum::<f64>() / d as f64;
        let tail = 2.0 * k as f64 * window;
        let gap = (partial + tail - value).abs();
        if gap > slack.max(0.5 * tail) {
            return Err(Error::Disagreement {
                what: "Ω(1) vs partial sum plus tail".into(),
                difference: gap,
                bound: slack.max(0.5 * tail),
            });
        }
        Ok(OmegaSum {
            value,
            partial_sum: partial,
            tail_estimate: tail,
            route: route.into(),
        })
    }
}

/// Checks `P(T⁻ = n) / P(τ⁻ = n) → Ω(1)`, period-averaged as in
/// [`verify_local_law_minus`].
pub fn verify_omega_ratio(
    t_minus: &[f64],
    tau_minus: &[f64],
    omega: &OmegaSum,
    grid: &[u64],
    schedule: ToleranceSchedule,
    period: u64,
) -> AsymptoticReport {
    let d = period.max(1);
    let mut rep = AsymptoticReport::new(TheoremId::OmegaRatio, schedule, VerdictRule::LargestN, d);
    let order = t_minus.len().min(tau_minus.len()) as u64 - 1;
    for &n in grid {
        if n == 0 || n + d - 1 > order {
            rep.notes
                .push(format!("n = {n} dropped: beyond order {order}"));
            continue;
        }
        let w = (n as usize)..(n + d) as usize;
        let num: f64 = t_minus[w.clone()].iter().sum();
        let den: f64 = tau_minus[w].iter().sum();
        if !(den > SURVIVAL_FLOOR) {
            rep.notes.push(format!(
                "n = {n} dropped: P(τ⁻ = n) below the numeric floor"
            ));
            continue;
        }
        let measured = num / den;
        let t = tau_minus[n as usize];
        let literal = if t > 0.0 {
            Some(t_minus[n as usize] / t)
        } else {
            None
        };
        rep.push_row(n, measured, omega.value, (measured, measured), literal);
    }
    rep.metadata
        .insert("omega_partial_sum".into(), omega.partial_sum);
    rep.metadata
        .insert("omega_tail_estimate".into(), omega.tail_estimate);
    rep.notes.push(format!("Ω(1) route: {}", omega.route));
    rep.decide();
    rep
}

// ---------------------------------------------------------------------------
// Conditioned local probabilities

/// Checks that `n c_n b_n(j) / (h H(j-1))` is flat in `j` and matches the
/// calibrated `ĝ0`.
pub fn verify_small_deviations(
    model: &IncrementModel,
    killed: &KilledWalkTable<f64>,
    renewal: &RenewalTable,
    calib: &CalibrationConstants,
    n: u64,
    j_max: u64,
    tol: f64,
) -> Result<AsymptoticReport> {
    if model.period() != 1 {
        return Err(Error::InvalidModel(format!(
            "conditioned local limits need an aperiodic walk (period {})",
            model.period()
        )));
    }
    if (n as usize) > killed.n_max() || (j_max as usize) > killed.stored_cols {
        return Err(Error::InvalidArgument(format!(
            "killed table covers n ≤ {} and j ≤ {}",
            killed.n_max(),
            killed.stored_cols
        )));
    }
    if j_max as usize > renewal.x_max + 1 {
        return Err(Error::InvalidArgument("renewal table too short".into()));
    }
    let worst_remainder = (0..j_max as usize)
        .map(|x| renewal.remainder[x].abs() / renewal.h[x])
        .fold(0.0, f64::max);
    if !renewal.exact_remainder && !(worst_remainder <= 0.1 * tol) {
        return Err(Error::Insufficient(format!(
            "renewal truncation remainder {worst_remainder:e} exceeds {:e}",
            0.1 * tol
        )));
    }
    let schedule = ToleranceSchedule::constant(ToleranceKind::Relative, tol);
    let mut rep = AsymptoticReport::new(TheoremId::SmallDev, schedule, VerdictRule::AllRowsFlat, 1)
        .with_model(model.spec());
    let c_n = model.normalizing_sequence(n);
    let h = model.span();
    for j in 1..=j_max {
        let b = killed.b(n as usize, j as i64);
        let measured = n as f64 * c_n * b / (h * renewal.h[(j - 1) as usize]);
        rep.push_row(j, measured, calib.g0_hat, (measured, measured), None);
    }
    rep.metadata.insert("n".into(), n as f64);
    rep.metadata.insert("c_n".into(), c_n);
    rep.metadata.insert("flatness".into(), rep.spread());
    if killed.stored_cols == killed.j_max {
        let row = &killed.b[n as usize];
        let mut s = 0.0;
        for v in row {
            s += v;
        }
        rep.metadata.insert(
            "row_sum_identity".into(),
            f64::from(u8::from(s == killed.survival[n as usize])),
        );
    }
    rep.calibration = Some(calib.clone());
    rep.decide();
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Renewal function growth

fn log_slope(h: &[f64], lo: usize, hi: usize) -> f64 {
    let mut xs: Vec<usize> = (0..=60)
        .map(|k| {
            let t = k as f64 / 60.0;
            libm::round(libm::exp(
                libm::log(lo as f64) * (1.0 - t) + libm::log(hi as f64) * t,
            )) as usize
        })
        .collect();
    xs.dedup();
    let lx: Vec<f64> = xs.iter().map(|x| libm::log(*x as f64)).collect();
    let ly: Vec<f64> = xs.iter().map(|x| libm::log(h[*x])).collect();
    ols_slope(&lx, &ly)
}

/// Log-log slope of `H` over `[x/100, x]` against `αρ` (or 1 when
/// `αρ = 1`), absolute tolerance 0.1.
pub fn verify_renewal_asymptotics(
    renewal: &RenewalTable,
    model: &IncrementModel,
) -> Result<AsymptoticReport> {
    if !renewal.is_nondecreasing() {
        return Err(Error::InvalidArgument("H must be nondecreasing".into()));
    }
    let x_max = renewal.x_max;
    if x_max < 100 {
        return Err(Error::Insufficient(format!(
            "insufficient range: x_max = {x_max} spans fewer than two decades"
        )));
    }
    let ar = model.alpha() * model.rho();
    let target = if ar < 1.0 - 1e-12 { ar } else { 1.0 };
    let schedule = ToleranceSchedule::constant(ToleranceKind::Absolute, 0.1);
    let mut rep = AsymptoticReport::new(TheoremId::Renewal, schedule, VerdictRule::LargestN, 1)
        .with_model(model.spec());
    let mut ends = Vec::new();
    let mut x = 100;
    while x < x_max {
        ends.push(x);
        x *= 10;
    }
    ends.push(x_max);
    for x in ends {
        let slope = log_slope(&renewal.h, x / 100, x);
        rep.push_row(x as u64, slope, target, (slope, slope), None);
    }
    rep.metadata.insert("alpha_rho".into(), ar);
    if let Some(l3) = renewal.l3(x_max as f64) {
        rep.metadata.insert("l3(x_max)".into(), l3);
        rep.metadata.insert(
            "H(x_max) / (x_max l3)".into(),
            renewal.h[x_max] / (x_max as f64 * l3),
        );
    }
    if !renewal.exact_remainder {
        rep.notes.push(format!(
            "H from a duality sum with {} terms plus an extrapolated tail; leaked mass {:e}",
            renewal.n_dual, renewal.leaked
        ));
    }
    rep.decide();
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Spitzer / Doney diagnostic

/// Cesàro means of `P(S_n > 0)` against `ρ` (absolute tolerance `tol`);
/// `P(S_n > 0)` itself goes in the `literal` column.
pub fn spitzer_doney_diagnostic(
    signs: &SignSequence<f64>,
    rho: f64,
    grid: &[u64],
    tol: f64,
) -> AsymptoticReport {
    let schedule = ToleranceSchedule::constant(ToleranceKind::Absolute, tol);
    let mut rep = AsymptoticReport::new(TheoremId::Spitzer, schedule, VerdictRule::LargestN, 1);
    let mut prefix = Vec::with_capacity(signs.len() + 1);
    let mut err_prefix = Vec::with_capacity(signs.len() + 1);
    prefix.push(0.0);
    err_prefix.push(0.0);
    for (k, g) in signs.gt_zero.iter().enumerate() {
        prefix.push(prefix[k] + g);
        let e = signs.stderr.as_ref().map(|s| s[k]).unwrap_or(0.0);
        err_prefix.push(err_prefix[k] + e);
    }
    for &n in grid {
        if n == 0 || n as usize > signs.len() {
            rep.notes
                .push(format!("n = {n} dropped: beyond the sign sequence"));
            continue;
        }
        let nf = n as f64;
        let cesaro = prefix[n as usize] / nf;
        let e = err_prefix[n as usize] / nf;
        rep.push_row(
            n,
            cesaro,
            rho,
            (cesaro - 1.96 * e, cesaro + 1.96 * e),
            Some(signs.gt_zero[n as usize - 1]),
        );
    }
    rep.decide();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_ids_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
        }
        assert!("main-double-prime".parse::<TheoremId>().is_err());
    }

    #[test]
    fn schedules() {
        let s = ToleranceSchedule::exact_lattice();
        s.validate().unwrap();
        assert_eq!(s.tol(2000), 0.02);
        assert_eq!(s.tol(4000), 0.02);
        assert_eq!(s.tol(250), 0.10);
        let bad = ToleranceSchedule {
            kind: ToleranceKind::Relative,
            steps: alloc::vec![(0, 0.01), (10, 0.1)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn verdict_uses_largest_n() {
        let row = |n, m| ReportRow {
            n,
            measured: m,
            predicted: 1.0,
            ratio: m,
            ci_lo: m,
            ci_hi: m,
            tolerance: 0.0,
            pass: false,
            literal: None,
        };
        let s = ToleranceSchedule::constant(ToleranceKind::Relative, 0.05);
        assert_eq!(
            verdict_of(&[row(10, 2.0), row(20, 1.01)], &s, VerdictRule::LargestN),
            Verdict::Pass
        );
        assert_eq!(
            verdict_of(&[row(20, 1.2), row(10, 1.0)], &s, VerdictRule::LargestN),
            Verdict::Fail
        );
        assert_eq!(
            verdict_of(&[], &s, VerdictRule::LargestN),
            Verdict::Insufficient
        );
        assert_eq!(
            verdict_of(&[row(1, 1.0), row(2, 1.04)], &s, VerdictRule::AllRowsFlat),
            Verdict::Pass
        );
        assert_eq!(
            verdict_of(&[row(1, 0.97), row(2, 1.04)], &s, VerdictRule::AllRowsFlat),
            Verdict::Fail
        );
    }
}
