//! Exact dynamic programming for arithmetic walks (span rescaled to 1):
//! marginals, the walk killed on `(-∞, 0]`, first-passage heights, the
//! renewal function `H` by duality, and the Eppel identity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_in_place, FftConvolver};
use crate::increments::{IncrementModel, LatticePmf, ModelKind};
use crate::numeric;
use crate::scalar::Scalar;
use crate::series::{SignSequence, SignSource};

/// Leaked mass above which a killed table is flagged.
pub const LEAK_LIMIT: f64 = 1e-9;

/// Default cap on the number of stored marginal cells.
pub const DEFAULT_CELL_LIMIT: usize = 1 << 24;

// Direct convolution below this many multiply-adds per step.
const FFT_THRESHOLD: usize = 1 << 22;

/// Step law with prefix sums for `P(X ≤ k)` and `P(X ≥ k)`.
#[derive(Debug, Clone)]
pub struct StepLaw<T> {
    pmf: LatticePmf<T>,
    cdf: Vec<T>,
    sf: Vec<T>,
}

impl<T: Scalar> StepLaw<T> {
    pub fn new(pmf: LatticePmf<T>) -> Self {
        let mut cdf = Vec::with_capacity(pmf.probs.len());
        let mut acc = T::zero();
        for p in &pmf.probs {
            acc = acc + p.clone();
            cdf.push(acc.clone());
        }
        let mut sf = vec![T::zero(); pmf.probs.len()];
        let mut acc = T::zero();
        for (i, p) in pmf.probs.iter().enumerate().rev() {
            acc = acc + p.clone();
            sf[i] = acc.clone();
        }
        StepLaw { pmf, cdf, sf }
    }

    pub fn pmf(&self) -> &LatticePmf<T> {
        &self.pmf
    }

    fn min(&self) -> i64 {
        self.pmf.min_value()
    }

    fn max(&self) -> i64 {
        self.pmf.max_value()
    }

    fn prob(&self, k: i64) -> T {
        self.pmf.prob(k)
    }

    fn cdf_at(&self, k: i64) -> T {
        let i = k - self.pmf.offset;
        if i < 0 {
            T::zero()
        } else if i >= self.cdf.len() as i64 {
            T::one()
        } else {
            self.cdf[i as usize].clone()
        }
    }

    fn sf_at(&self, k: i64) -> T {
        let i = k - self.pmf.offset;
        if i < 0 {
            T::one()
        } else if i >= self.sf.len() as i64 {
            T::zero()
        } else {
            self.sf[i as usize].clone()
        }
    }
}

fn model_law(model: &IncrementModel) -> Result<StepLaw<f64>> {
    model
        .lattice_pmf()
        .cloned()
        .map(StepLaw::new)
        .ok_or_else(|| Error::InvalidModel("exact lattice routines need a lattice model".into()))
}

// ---------------------------------------------------------------------------
// Marginals and sign sequences

/// `P(S_n = j)` in lattice units for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable<T = f64> {
    /// Row `n` covers `j = offsets[n] .. offsets[n] + rows[n].len()`.
    pub offsets: Vec<i64>,
    pub rows: Vec<Vec<T>>,
    pub span: f64,
}

fn convolve_step<T: Scalar>(row: &[T], offset: i64, law: &StepLaw<T>) -> (Vec<T>, i64) {
    let width = law.pmf.probs.len();
    let mut next = vec![T::zero(); row.len() + width - 1];
    for (i, m) in row.iter().enumerate() {
        if m.is_zero() {
            continue;
        }
        for (k, p) in law.pmf.probs.iter().enumerate() {
            if !p.is_zero() {
                next[i + k] = next[i + k].clone() + m.clone() * p.clone();
            }
        }
    }
    (next, offset + law.min())
}

impl<T: Scalar> MarginalTable<T> {
    /// Exact convolution powers of `pmf` up to `n_max`.
    pub fn build(pmf: &LatticePmf<T>, n_max: usize, span: f64, cell_limit: usize) -> Result<Self> {
        let width = pmf.probs.len();
        let cells = (0..=n_max).map(|n| n * (width - 1) + 1).sum::<usize>();
        if cells > cell_limit {
            return Err(Error::MemoryGuard {
                cells,
                limit: cell_limit,
            });
        }
        let law = StepLaw::new(pmf.clone());
        let mut offsets = vec![0i64];
        let mut rows = vec![vec![T::one()]];
        for n in 1..=n_max {
            let (row, off) = convolve_step(&rows[n - 1], offsets[n - 1], &law);
            rows.push(row);
            offsets.push(off);
        }
        Ok(MarginalTable {
            offsets,
            rows,
            span,
        })
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// `P(S_n = j)`.
    pub fn prob(&self, n: usize, j: i64) -> T {
        let i = j - self.offsets[n];
        if i < 0 || i >= self.rows[n].len() as i64 {
            T::zero()
        } else {
            self.rows[n][i as usize].clone()
        }
    }

    /// `P(S_n ∈ (lo, hi])`.
    pub fn mass_in(&self, n: usize, lo: i64, hi: i64) -> T {
        let mut acc = T::zero();
        for j in (lo + 1)..=hi {
            acc = acc + self.prob(n, j);
        }
        acc
    }

    /// Sign probabilities read off the table.
    pub fn signs(&self) -> SignSequence<T> {
        let mut le = Vec::new();
        let mut gt = Vec::new();
        let mut eq = Vec::new();
        for n in 1..=self.n_max() {
            let (l, g, e) = row_signs(&self.rows[n], self.offsets[n]);
            le.push(l);
            gt.push(g);
            eq.push(e);
        }
        SignSequence {
            le_zero: le,
            gt_zero: gt,
            eq_zero: eq,
            source: SignSource::Exact,
            stderr: None,
        }
    }
}

fn row_signs<T: Scalar>(row: &[T], offset: i64) -> (T, T, T) {
    let mut le = T::zero();
    let mut gt = T::zero();
    let mut eq = T::zero();
    for (i, m) in row.iter().enumerate() {
        let j = offset + i as i64;
        if j > 0 {
            gt = gt + m.clone();
        } else {
            le = le + m.clone();
            if j == 0 {
                eq = m.clone();
            }
        }
    }
    (le, gt, eq)
}

/// Sign probabilities of `S_1..S_N`, keeping only one marginal row in memory.
pub fn lattice_signs<T: Scalar>(pmf: &LatticePmf<T>, order: usize) -> SignSequence<T> {
    let law = StepLaw::new(pmf.clone());
    let mut row = vec![T::one()];
    let mut offset = 0;
    let mut le = Vec::with_capacity(order);
    let mut gt = Vec::with_capacity(order);
    let mut eq = Vec::with_capacity(order);
    for _ in 0..order {
        let (next, off) = convolve_step(&row, offset, &law);
        row = next;
        offset = off;
        let (l, g, e) = row_signs(&row, offset);
        le.push(l);
        gt.push(g);
        eq.push(e);
    }
    SignSequence {
        le_zero: le,
        gt_zero: gt,
        eq_zero: eq,
        source: SignSource::Exact,
        stderr: None,
    }
}

/// Exact sign sequence of a lattice model, guarded against wide supports.
pub fn sign_sequence(
    model: &IncrementModel,
    order: usize,
    cell_limit: usize,
) -> Result<SignSequence<f64>> {
    let pmf = model_law(model)?.pmf;
    let work = pmf.probs.len().saturating_mul(order);
    if work > cell_limit {
        return Err(Error::MemoryGuard {
            cells: work,
            limit: cell_limit,
        });
    }
    Ok(lattice_signs(&pmf, order))
}

/// Marginals of a lattice model.
pub fn marginals(
    model: &IncrementModel,
    n_max: usize,
    cell_limit: usize,
) -> Result<MarginalTable<f64>> {
    let pmf = model_law(model)?.pmf;
    MarginalTable::build(&pmf, n_max, model.span(), cell_limit)
}

// ---------------------------------------------------------------------------
// Killed stepping

/// One step of a walk confined to `[base, j_max]`.
struct StepOut<T> {
    row: Vec<T>,
    /// Mass that left below `base`.
    absorbed: T,
    /// `absorbed_at[d]`: mass landing on `base - 1 - d`.
    absorbed_at: Vec<T>,
    /// Mass that left above `j_max`.
    leaked: T,
}

struct Confined<'a, T> {
    law: &'a StepLaw<T>,
    base: usize,
    j_max: usize,
    depth: usize,
}

impl<T: Scalar> Confined<'_, T> {
    fn boundary_mass(&self, row: &[T]) -> (T, T) {
        let mut absorbed = T::zero();
        let mut leaked = T::zero();
        for (i, m) in row.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let i = i as i64;
            absorbed = absorbed + m.clone() * self.law.cdf_at(self.base as i64 - 1 - i);
            leaked = leaked + m.clone() * self.law.sf_at(self.j_max as i64 + 1 - i);
        }
        (absorbed, leaked)
    }

    fn step_direct(&self, row: &[T]) -> StepOut<T> {
        let (kmin, kmax) = (self.law.min(), self.law.max());
        let mut next = vec![T::zero(); self.j_max + 1];
        let mut absorbed_at = vec![T::zero(); self.depth];
        for (i, m) in row.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let i = i as i64;
            let lo = (self.base as i64 - i).max(kmin);
            let hi = (self.j_max as i64 - i).min(kmax);
            for k in lo..=hi {
                let p = self.law.prob(k);
                if !p.is_zero() {
                    let t = (i + k) as usize;
                    next[t] = next[t].clone() + m.clone() * p;
                }
            }
            for (d, slot) in absorbed_at.iter_mut().enumerate() {
                let k = self.base as i64 - 1 - d as i64 - i;
                if k < kmin {
                    break;
                }
                if k <= kmax {
                    *slot = slot.clone() + m.clone() * self.law.prob(k);
                }
            }
        }
        let (absorbed, leaked) = self.boundary_mass(row);
        StepOut {
            row: next,
            absorbed,
            absorbed_at,
            leaked,
        }
    }

    fn kernel_window(&self) -> (i64, i64) {
        let kmin = self
            .law
            .min()
            .max(self.base as i64 - 1 - self.depth as i64 - self.j_max as i64);
        let kmax = self.law.max().min(self.j_max as i64);
        (kmin, kmax)
    }
}

impl Confined<'_, f64> {
    fn wants_fft(&self) -> bool {
        let (kmin, kmax) = self.kernel_window();
        let width = (kmax - kmin + 1).max(0) as usize;
        width > 64 && width.saturating_mul(self.j_max + 1) > FFT_THRESHOLD
    }

    fn convolver(&self) -> (FftConvolver, i64) {
        let (kmin, kmax) = self.kernel_window();
        let kernel: Vec<f64> = (kmin..=kmax).map(|k| self.law.prob(k)).collect();
        (FftConvolver::new(&kernel, self.j_max + 1), kmin)
    }

    fn step_fft(&self, row: &[f64], conv: &FftConvolver, kmin: i64) -> StepOut<f64> {
        let full = conv.convolve(row);
        let at = |t: i64| -> f64 {
            let c = t - kmin;
            if c < 0 || c >= full.len() as i64 {
                0.0
            } else {
                full[c as usize].max(0.0)
            }
        };
        let mut next = vec![0.0; self.j_max + 1];
        for (t, slot) in next.iter_mut().enumerate().skip(self.base) {
            *slot = at(t as i64);
        }
        let absorbed_at = (0..self.depth)
            .map(|d| at(self.base as i64 - 1 - d as i64))
            .collect();
        let (absorbed, leaked) = self.boundary_mass(row);
        StepOut {
            row: next,
            absorbed,
            absorbed_at,
            leaked,
        }
    }
}

// ---------------------------------------------------------------------------
// Killed walk

/// Exact tables for the walk killed on `(-∞, 0]`.
///
/// `b[n][j] = P(S_n = j, τ⁻ > n)` for `1 ≤ j ≤ stored_cols`; column 0 is
/// unused. Row 0 is empty because `S_0 = 0`; `survival[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KilledWalkTable<T = f64> {
    pub j_max: usize,
    pub stored_cols: usize,
    pub b: Vec<Vec<T>>,
    /// `P(τ⁻ > n)`: row sums over all `j ≤ j_max` in index order.
    pub survival: Vec<T>,
    /// `P(τ⁻ = n) = survival[n-1] - survival[n]`.
    pub pmf: Vec<T>,
    /// Mass sent to `(-∞, 0]` at step `n`; equals `pmf[n]` when nothing leaks.
    pub killed: Vec<T>,
    /// Mass that jumped above `j_max` at step `n` (dropped from the table).
    pub leaked: Vec<f64>,
    pub leaked_total: f64,
}

impl<T: Scalar> KilledWalkTable<T> {
    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    /// `b_n(j)`; zero outside the stored range.
    pub fn b(&self, n: usize, j: i64) -> T {
        if j < 1 || j as usize > self.stored_cols {
            T::zero()
        } else {
            self.b[n][j as usize].clone()
        }
    }

    /// `B_n(x) = P(S_n ∈ (0, x], τ⁻ > n)`.
    pub fn big_b(&self, n: usize, x: i64) -> T {
        assert!(
            x < 0 || (x as usize) <= self.stored_cols,
            "x = {x} beyond stored columns {}",
            self.stored_cols
        );
        let mut acc = T::zero();
        for j in 1..=x.max(0) as usize {
            acc = acc + self.b[n][j].clone();
        }
        acc
    }

    pub fn is_flagged(&self) -> bool {
        self.leaked_total > LEAK_LIMIT
    }

    /// The table, or [`Error::Leak`] when truncation lost more than
    /// [`LEAK_LIMIT`].
    pub fn checked(self) -> Result<Self> {
        if self.is_flagged() {
            Err(Error::Leak {
                leaked: self.leaked_total,
                limit: LEAK_LIMIT,
            })
        } else {
            Ok(self)
        }
    }
}

fn run_killed<T: Scalar, F: FnMut(&[T]) -> StepOut<T>>(
    n_max: usize,
    j_max: usize,
    stored_cols: usize,
    mut step: F,
) -> KilledWalkTable<T> {
    let stored_cols = stored_cols.min(j_max);
    let mut row = vec![T::zero(); j_max + 1];
    row[0] = T::one();
    let mut b = vec![vec![T::zero(); stored_cols + 1]];
    let mut survival = vec![T::one()];
    let mut pmf = vec![T::zero()];
    let mut killed = vec![T::zero()];
    let mut leaked = vec![0.0];
    let mut leaked_total = 0.0;
    for n in 1..=n_max {
        let out = step(&row);
        row = out.row;
        let mut s = T::zero();
        for m in row.iter() {
            s = s + m.clone();
        }
        pmf.push(survival[n - 1].clone() - s.clone());
        survival.push(s);
        killed.push(out.absorbed);
        let l = out.leaked.to_f64();
        leaked.push(l);
        leaked_total += l;
        b.push(row[..=stored_cols].to_vec());
    }
    KilledWalkTable {
        j_max,
        stored_cols,
        b,
        survival,
        pmf,
        killed,
        leaked,
        leaked_total,
    }
}

/// Killed-walk DP over any scalar type (direct convolution).
pub fn killed_walk_exact<T: Scalar>(
    pmf: &LatticePmf<T>,
    n_max: usize,
    j_max: usize,
    stored_cols: usize,
) -> KilledWalkTable<T> {
    let law = StepLaw::new(pmf.clone());
    let conf = Confined {
        law: &law,
        base: 1,
        j_max,
        depth: 0,
    };
    run_killed(n_max, j_max, stored_cols, |row| conf.step_direct(row))
}

/// Largest upward jump, or `None` for unbounded supports.
fn max_up(model: &IncrementModel) -> Option<usize> {
    match model.kind() {
        ModelKind::FiniteLattice => model.lattice_pmf().map(|p| p.max_value().max(0) as usize),
        _ => None,
    }
}

fn max_down(model: &IncrementModel) -> Option<usize> {
    match model.kind() {
        ModelKind::FiniteLattice => model
            .lattice_pmf()
            .map(|p| (-p.min_value()).max(0) as usize),
        _ => None,
    }
}

/// Killed-walk tables of a lattice model.
///
/// `j_max = None` picks the leak-free bound `n_max · (largest up-jump)` for
/// finite supports and is an error for unbounded ones. `stored_cols`
/// limits the columns kept per row (all by default). The result may be
/// flagged; see [`KilledWalkTable::checked`].
pub fn killed_walk(
    model: &IncrementModel,
    n_max: usize,
    j_max: Option<usize>,
    stored_cols: Option<usize>,
) -> Result<KilledWalkTable<f64>> {
    let law = model_law(model)?;
    let j_max = match (j_max, max_up(model)) {
        (Some(j), _) => j,
        (None, Some(up)) => (n_max * up).max(1),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "j_max is required for unbounded lattice supports".into(),
            ))
        }
    };
    if j_max == 0 {
        return Err(Error::InvalidArgument("j_max must be positive".into()));
    }
    let conf = Confined {
        law: &law,
        base: 1,
        j_max,
        depth: 0,
    };
    let stored = stored_cols.unwrap_or(j_max);
    if conf.wants_fft() {
        let (conv, kmin) = conf.convolver();
        Ok(run_killed(n_max, j_max, stored, |row| {
            conf.step_fft(row, &conv, kmin)
        }))
    } else {
        Ok(run_killed(n_max, j_max, stored, |row| {
            conf.step_direct(row)
        }))
    }
}

// ---------------------------------------------------------------------------
// First passage into (0, ∞)

/// Joint law of `(τ⁺, χ⁺)`: `f[n][y] = P(τ⁺ = n, χ⁺ = y)` for `1 ≤ y ≤ y_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageTable {
    pub y_max: usize,
    pub f: Vec<Vec<f64>>,
    /// `P(τ⁺ = n)` regardless of height.
    pub tau_plus_pmf: Vec<f64>,
    /// Mass that went below `-j_max` while still in `(-∞, 0]`.
    pub leaked_total: f64,
}

/// First-passage DP: the walk is kept on `(-∞, 0]` (as `W = -S ≥ 0` with
/// `W ≤ j_max`) until it first jumps into `(0, ∞)`.
pub fn first_passage(
    model: &IncrementModel,
    n_max: usize,
    y_max: usize,
    j_max: Option<usize>,
) -> Result<FirstPassageTable> {
    let law = model_law(model)?;
    let mirror = StepLaw::new(law.pmf.mirror());
    let j_max = match (j_max, max_down(model)) {
        (Some(j), _) => j,
        (None, Some(down)) => (n_max * down).max(1),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "j_max is required for unbounded lattice supports".into(),
            ))
        }
    };
    let conf = Confined {
        law: &mirror,
        base: 0,
        j_max,
        depth: y_max,
    };
    let fft = if conf.wants_fft() {
        Some(conf.convolver())
    } else {
        None
    };
    let mut row = vec![0.0; j_max + 1];
    row[0] = 1.0;
    let mut f = vec![vec![0.0; y_max + 1]];
    let mut tau_plus_pmf = vec![0.0];
    let mut leaked_total = 0.0;
    for _ in 1..=n_max {
        let out = match &fft {
            Some((conv, kmin)) => conf.step_fft(&row, conv, *kmin),
            None => conf.step_direct(&row),
        };
        let mut fr = vec![0.0; y_max + 1];
        fr[1..].copy_from_slice(&out.absorbed_at);
        f.push(fr);
        tau_plus_pmf.push(out.absorbed);
        leaked_total += out.leaked;
        row = out.row;
    }
    Ok(FirstPassageTable {
        y_max,
        f,
        tau_plus_pmf,
        leaked_total,
    })
}

/// `Σ_{y ≤ x} Σ_{n ≤ N} P(n is a strict ascending ladder epoch, S_n = y)`
/// for `x = 0..=x_max`, from the joint law of `(τ⁺, χ⁺)`. By duality this
/// equals `1 + Σ_{n=1}^{N} B_n(x)` exactly, for the same `N`.
pub fn ladder_renewal_matched(fp: &FirstPassageTable, x_max: usize) -> Vec<f64> {
    assert!(x_max <= fp.y_max);
    let n = fp.f.len() - 1;
    let size = (2 * (n + 1)).next_power_of_two();
    let zero = Complex64::new(0.0, 0.0);
    let transform = |coeffs: &mut dyn Iterator<Item = f64>| -> Vec<Complex64> {
        let mut buf = vec![zero; size];
        for (slot, c) in buf.iter_mut().zip(coeffs) {
            slot.re = c;
        }
        fft_in_place(&mut buf, false);
        buf
    };
    // Heights beyond the last nonzero column never contribute.
    let k_hi = (1..=x_max)
        .rev()
        .find(|&y| fp.f.iter().any(|row| row[y] != 0.0))
        .unwrap_or(0);
    let f_hat: Vec<Vec<Complex64>> = (0..=k_hi)
        .map(|y| transform(&mut (0..=n).map(|m| if y == 0 { 0.0 } else { fp.f[m][y] })))
        .collect();
    // Ring of the last k_hi transforms of U_y.
    let ring = k_hi.max(1);
    let mut u_hat: Vec<Vec<Complex64>> = Vec::with_capacity(ring);
    let mut totals = Vec::with_capacity(x_max + 1);
    // U_0 = 1.
    u_hat.push(transform(&mut core::iter::once(1.0)));
    totals.push(1.0);
    let scale = 1.0 / size as f64;
    for y in 1..=x_max {
        let mut acc = vec![zero; size];
        for k in 1..=y.min(k_hi) {
            for ((a, fk), uy) in acc.iter_mut().zip(&f_hat[k]).zip(&u_hat[(y - k) % ring]) {
                *a += fk * uy;
            }
        }
        fft_in_place(&mut acc, true);
        let coeffs: Vec<f64> = acc.iter().take(n + 1).map(|c| c.re * scale).collect();
        totals.push(coeffs.iter().sum());
        let next = transform(&mut coeffs.into_iter());
        if u_hat.len() < ring {
            u_hat.push(next);
        } else {
            u_hat[y % ring] = next;
        }
    }
    let mut h = Vec::with_capacity(x_max + 1);
    let mut acc = 0.0;
    for t in totals {
        acc += t;
        h.push(acc);
    }
    h
}

// ---------------------------------------------------------------------------
// Exact ladder height law through polynomial roots

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// All complex roots of `Σ c_i w^i` (Aberth iteration plus Newton polish).
pub fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = c[d].abs();
    let radius = (0..d)
        .map(|i| libm::pow(c[i].abs() / lead, 1.0 / (d - i) as f64))
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            Complex64::from_polar(
                radius,
                2.0 * core::f64::consts::PI * k as f64 / d as f64 + 0.4,
            )
        })
        .collect();
    for _ in 0..2000 {
        let mut biggest: f64 = 0.0;
        for k in 0..d {
            let (p, dp) = horner(&c, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != k {
                    s += (z[k] - z[j]).inv();
                }
            }
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if w.is_finite() {
                z[k] -= w;
                biggest = biggest.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&c, *root);
            let step = p / dp;
            if step.is_finite() {
                *root -= step;
            }
        }
    }
    z
}

// Divides by (w - 1); returns quotient and remainder.
fn deflate_unit(c: &[f64]) -> (Vec<f64>, f64) {
    let d = c.len() - 1;
    let mut q = vec![0.0; d];
    q[d - 1] = c[d];
    for i in (1..d).rev() {
        q[i - 1] = c[i] + q[i];
    }
    let rem = c[0] + q[0];
    (q, rem)
}

/// Law of the first strict ascending ladder height `χ⁺` of a zero-mean
/// finite lattice walk: `pmf[y] = P(χ⁺ = y)` for `y = 0..=b`.
///
/// With the pmf on `[-a, b]`, `w^a (1 - E w^X)` has a double root at 1,
/// `a - 1` roots inside and `b - 1` roots `r_i` outside the unit disk, and
/// `1 - E w^{χ⁺} = (1 - w) Π (1 - w / r_i)`.
pub fn ladder_height_law(model: &IncrementModel) -> Result<Vec<f64>> {
    if model.kind() != ModelKind::FiniteLattice {
        return Err(Error::InvalidModel(
            "exact ladder heights need a finite lattice model".into(),
        ));
    }
    let pmf = model.lattice_pmf().expect("finite lattice");
    let a = (-pmf.min_value()) as usize;
    let b = pmf.max_value() as usize;
    let mut c = vec![0.0; a + b + 1];
    for (i, p) in pmf.probs.iter().enumerate() {
        let k = pmf.offset + i as i64;
        c[(k + a as i64) as usize] -= p;
    }
    c[a] += 1.0;
    let (c1, r1) = deflate_unit(&c);
    let (c2, r2) = deflate_unit(&c1);
    if r1.abs() > 1e-9 || r2.abs() > 1e-9 {
        return Err(Error::Degenerate(format!(
            "w = 1 is not a double root (remainders {r1:e}, {r2:e})"
        )));
    }
    let outside: Vec<Complex64> = poly_roots(&c2)
        .into_iter()
        .filter(|r| r.norm() > 1.0)
        .collect();
    if outside.len() != b - 1 {
        return Err(Error::Degenerate(format!(
            "expected {} roots outside the unit disk, found {}",
            b - 1,
            outside.len()
        )));
    }
    // (1 - w) Π (1 - w / r_i)
    let mut poly = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
    for r in &outside {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, coef) in poly.iter().enumerate() {
            next[i] += coef;
            next[i + 1] -= coef / r;
        }
        poly = next;
    }
    let mut law = vec![0.0; b + 1];
    for y in 1..=b {
        let v = -poly[y].re;
        if v < -1e-12 {
            return Err(Error::Degenerate(format!(
                "negative ladder height mass {v:e} at {y}"
            )));
        }
        law[y] = v.max(0.0);
    }
    Ok(law)
}

/// `H(x) = Σ_{y ≤ x} u(y)` with `u(0) = 1`, `u(y) = Σ_k P(χ⁺ = k) u(y - k)`.
pub fn renewal_from_heights(heights: &[f64], x_max: usize) -> Vec<f64> {
    let mut u = vec![0.0; x_max + 1];
    u[0] = 1.0;
    for y in 1..=x_max {
        let mut acc = 0.0;
        for k in 1..=y.min(heights.len().saturating_sub(1)) {
            acc += heights[k] * u[y - k];
        }
        u[y] = acc;
    }
    let mut h = Vec::with_capacity(x_max + 1);
    let mut s = 0.0;
    for v in u {
        s += v;
        h.push(s);
    }
    h
}

// ---------------------------------------------------------------------------
// Renewal function

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalOptions {
    /// Terms kept in the duality sum.
    pub n_dual: usize,
    /// Spatial truncation of the killed walk (required for unbounded supports).
    pub j_max: Option<usize>,
    /// Allowed disagreement between the two matched-truncation constructions.
    pub tolerance: f64,
}

impl Default for RenewalOptions {
    fn default() -> Self {
        RenewalOptions {
            n_dual: 4096,
            j_max: None,
            tolerance: 1e-8,
        }
    }
}

/// Renewal function `H` on `x = 0..=x_max` (lattice units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalTable {
    pub x_max: usize,
    pub span: f64,
    /// Best available `H(x)`: exact for finite supports, duality sum plus
    /// extrapolated tail otherwise.
    pub h: Vec<f64>,
    /// `P(χ⁺ = y)` when known exactly.
    pub ladder_height_pmf: Option<Vec<f64>>,
    /// `1 + Σ_{n ≤ N} B_n(x)`.
    pub h_dual: Vec<f64>,
    /// The same truncated sum built from ladder-height convolutions.
    pub h_ladder_matched: Option<Vec<f64>>,
    pub matched_difference: Option<f64>,
    /// `h - h_dual`: exact for finite supports, an extrapolation otherwise.
    pub remainder: Vec<f64>,
    pub exact_remainder: bool,
    pub n_dual: usize,
    pub leaked: f64,
}

impl RenewalTable {
    /// `H(x)` for real `x` in original units (0 for `x < 0`).
    pub fn value_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let j = libm::floor(x / self.span + 1e-9) as usize;
        self.h[j.min(self.x_max)]
    }

    /// `l₃(x) = (∫_0^x P(χ⁺ > y) dy)^{-1}` in lattice units, when the
    /// height law is known.
    pub fn l3(&self, x: f64) -> Option<f64> {
        let pmf = self.ladder_height_pmf.as_ref()?;
        let tail = |j: usize| -> f64 { 1.0 - pmf.iter().take(j + 1).sum::<f64>() };
        let whole = libm::floor(x) as usize;
        let mut integral: f64 = (0..whole).map(tail).sum();
        integral += (x - whole as f64) * tail(whole);
        Some(1.0 / integral)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.h.windows(2).all(|w| w[1] >= w[0])
    }
}

// Tail of Σ_n t_n beyond the last index, from a power-law fit to the last
// quarter of the terms at fixed x.
fn extrapolated_tail(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 16 {
        return f64::INFINITY;
    }
    let from = 3 * n / 4;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, t) in terms.iter().enumerate().skip(from) {
        if *t > 0.0 {
            xs.push(libm::log((i + 1) as f64));
            ys.push(libm::log(*t));
        }
    }
    if xs.len() < 4 {
        return 0.0;
    }
    let slope = numeric::ols_slope(&xs, &ys);
    let gamma = -slope;
    if gamma <= 1.0 {
        return f64::INFINITY;
    }
    let last = terms[n - 1];
    // Σ_{m > N} t_N (m/N)^{-γ} ≈ t_N N / (γ - 1)
    last * n as f64 / (gamma - 1.0)
}

/// Builds `H` by duality, cross-checked against the ladder-height route.
///
/// For finite supports both constructions use the same `N` and must agree
/// within `options.tolerance`; a larger gap is a hard error since duality
/// is an exact identity.
pub fn renewal_function(
    model: &IncrementModel,
    x_max: usize,
    options: &RenewalOptions,
) -> Result<RenewalTable> {
    let n = options.n_dual;
    let killed = killed_walk(model, n, options.j_max, Some(x_max))?;
    if killed.stored_cols < x_max {
        return Err(Error::InvalidArgument(format!(
            "x_max = {x_max} exceeds j_max = {}",
            killed.j_max
        )));
    }
    let mut h_dual = vec![1.0; x_max + 1];
    let mut terms = vec![vec![0.0; n]; x_max + 1];
    for m in 1..=n {
        // Running B_m(x) over x.
        let mut cum = 0.0;
        for x in 0..=x_max {
            if x > 0 {
                cum += killed.b[m][x];
            }
            terms[x][m - 1] = cum;
            h_dual[x] += cum;
        }
    }
    let finite = model.kind() == ModelKind::FiniteLattice;
    let (h_ladder_matched, matched_difference) = if finite {
        let fp = first_passage(model, n, x_max, None)?;
        let h_l = ladder_renewal_matched(&fp, x_max);
        let diff = h_l
            .iter()
            .zip(&h_dual)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff > options.tolerance {
            return Err(Error::Disagreement {
                what: "duality sum vs ladder-height renewal".into(),
                difference: diff,
                bound: options.tolerance,
            });
        }
        (Some(h_l), Some(diff))
    } else {
        (None, None)
    };
    let (h, ladder_height_pmf, remainder, exact_remainder) = if finite {
        let heights = ladder_height_law(model)?;
        let h = renewal_from_heights(&heights, x_max);
        let rem = h.iter().zip(&h_dual).map(|(a, b)| a - b).collect();
        (h, Some(heights), rem, true)
    } else {
        let rem: Vec<f64> = terms.iter().map(|t| extrapolated_tail(t)).collect();
        let h = h_dual
            .iter()
            .zip(&rem)
            .map(|(a, r)| if r.is_finite() { a + r } else { *a })
            .collect();
        (h, None, rem, false)
    };
    Ok(RenewalTable {
        x_max,
        span: model.span(),
        h,
        ladder_height_pmf,
        h_dual,
        h_ladder_matched,
        matched_difference,
        remainder,
        exact_remainder,
        n_dual: n,
        leaked: killed.leaked_total,
    })
}

// ---------------------------------------------------------------------------
// Eppel identity

/// `|n B_n(x) - P(S_n ∈ (0,x]) - Σ_{k=1}^{n-1} Σ_{0<y≤x} B_{n-k}(x-y) P(S_k = y)|`.
pub fn eppel_residual<T: Scalar>(
    marg: &MarginalTable<T>,
    killed: &KilledWalkTable<T>,
    n: usize,
    x: i64,
) -> f64 {
    let lhs = T::from_usize(n) * killed.big_b(n, x);
    let mut rhs = marg.mass_in(n, 0, x);
    for k in 1..n {
        for y in 1..=x {
            let p = marg.prob(k, y);
            if !p.is_zero() {
                rhs = rhs + killed.big_b(n - k, x - y) * p;
            }
        }
    }
    let d = (lhs - rhs).to_f64();
    d.abs()
}

// ---------------------------------------------------------------------------
// Ω(1) by Fourier inversion

/// `Ω(1) = exp{Σ_n P(S_n = 0)/n}` for a zero-mean finite lattice walk.
///
/// With `r(θ) = (1 - φ(θ)) / (1 - cos θ)`,
/// `Ω(1) = 2 exp{-(1/π) ∫_0^π ln|r(θ)| dθ}`.
pub fn omega_at_one(model: &IncrementModel) -> Result<f64> {
    if model.kind() != ModelKind::FiniteLattice {
        return Err(Error::InvalidModel(
            "Ω(1) by inversion needs a finite lattice model".into(),
        ));
    }
    let pmf = model.lattice_pmf().expect("finite lattice").clone();
    let integrand = |theta: f64| -> f64 {
        let s = libm::sin(theta / 2.0);
        let s2 = s * s;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, p) in pmf.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let k = (pmf.offset + i as i64) as f64;
            let sk = libm::sin(k * theta / 2.0);
            re += p * sk * sk;
            // Σ p_k k θ = 0, so subtract it to avoid cancellation near θ = 0.
            let kt = k * theta;
            let sin_minus = if kt.abs() < 1e-2 {
                let k3 = kt * kt * kt;
                -k3 / 6.0 + k3 * kt * kt / 120.0
            } else {
                libm::sin(kt) - kt
            };
            im += p * sin_minus;
        }
        let re_r = re / s2;
        let im_r = -im / (2.0 * s2);
        0.5 * libm::log(re_r * re_r + im_r * im_r)
    };
    let q = numeric::integrate(integrand, 0.0, core::f64::consts::PI, 1e-12)?;
    Ok(2.0 * libm::exp(-q.value / core::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_walk_marginals_and_killed() {
        let m = IncrementModel::simple_walk();
        let t = marginals(&m, 4, DEFAULT_CELL_LIMIT).unwrap();
        assert_eq!(t.prob(2, 0), 0.5);
        let s = t.signs();
        assert_eq!(s.le_zero[1], 0.75);
        let k = killed_walk(&m, 4, None, None).unwrap();
        assert_eq!(k.b(2, 2), 0.25);
        assert_eq!(k.b(1, 1), 0.5);
        assert!(!k.is_flagged());
    }

    #[test]
    fn lazy_walk_first_cells() {
        let m = IncrementModel::lazy_walk();
        let k = killed_walk(&m, 3, None, None).unwrap();
        assert_eq!(k.b(1, 1), 0.25);
        assert_eq!(k.survival[1], 0.25);
        assert_eq!(k.pmf[1], 0.75);
        let t = marginals(&m, 1, DEFAULT_CELL_LIMIT).unwrap();
        assert_eq!(t.prob(1, 0), 0.5);
    }

    #[test]
    fn memory_guard_trips() {
        let m = IncrementModel::lazy_walk();
        assert!(matches!(
            marginals(&m, 1000, 1000),
            Err(Error::MemoryGuard { .. })
        ));
    }

    #[test]
    fn leak_is_flagged() {
        let m = IncrementModel::lazy_walk();
        let k = killed_walk(&m, 50, Some(5), None).unwrap();
        assert!(k.is_flagged());
        assert!(k.clone().checked().is_err());
        assert!(k.leaked_total > 0.0);
    }

    #[test]
    fn simple_and_lazy_heights_are_unit() {
        for m in [IncrementModel::simple_walk(), IncrementModel::lazy_walk()] {
            let law = ladder_height_law(&m).unwrap();
            assert_eq!(law, vec![0.0, 1.0]);
            let h = renewal_from_heights(&law, 10);
            for (x, v) in h.iter().enumerate() {
                assert_eq!(*v, (x + 1) as f64);
            }
        }
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (w - 2)(w + 3)(w - 0.5) = w³ + 0.5w² - 6.5w + 3
        let mut r: Vec<f64> = poly_roots(&[3.0, -6.5, 0.5, 1.0])
            .iter()
            .map(|z| z.re)
            .collect();
        r.sort_by(f64::total_cmp);
        assert!(
            (r[0] + 3.0).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12 && (r[2] - 2.0).abs() < 1e-12
        );
    }

    #[test]
    fn omega_at_one_for_simple_and_lazy() {
        assert!((omega_at_one(&IncrementModel::simple_walk()).unwrap() - 2.0).abs() < 1e-10);
        assert!((omega_at_one(&IncrementModel::lazy_walk()).unwrap() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn eppel_first_step() {
        let m = IncrementModel::lazy_walk();
        let t = marginals(&m, 3, DEFAULT_CELL_LIMIT).unwrap();
        let k = killed_walk(&m, 3, None, None).unwrap();
        for x in 0..3 {
            assert_eq!(eppel_residual(&t, &k, 1, x), 0.0);
        }
    }
}
