//! Seeded Monte Carlo for ladder epochs, ladder heights, conditioned
//! endpoints and the meander functional.
//!
//! Every stream owns a ChaCha8 generator keyed by `(seed, stream id)` and a
//! fixed number of trials, so results depend only on the seed plan. Stream
//! outputs are kept apart and reduced in stream-id order, which makes the
//! merge exactly associative and independent of how streams were scheduled.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{IncrementModel, Sampler};
use crate::series::{SignSequence, SignSource};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Minimum acceptance rate for rejection sampling on `{τ⁻ > n}`.
pub const ACCEPTANCE_FLOOR: f64 = 1e-4;

/// Which streams to run and how many trials each gets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub seed: u64,
    /// `(stream id, trials)` pairs; ids must be distinct.
    pub streams: Vec<(u32, u64)>,
}

impl SeedPlan {
    /// `trials` split as evenly as possible over stream ids `0..streams`.
    pub fn even(seed: u64, trials: u64, streams: u32) -> Self {
        let streams = streams.max(1);
        let base = trials / streams as u64;
        let extra = trials % streams as u64;
        SeedPlan {
            seed,
            streams: (0..streams)
                .map(|s| (s, base + u64::from((s as u64) < extra)))
                .collect(),
        }
    }

    /// Streams `first..first+count`, each with `per_stream` trials.
    pub fn range(seed: u64, first: u32, count: u32, per_stream: u64) -> Self {
        SeedPlan {
            seed,
            streams: (first..first + count).map(|s| (s, per_stream)).collect(),
        }
    }

    pub fn total_trials(&self) -> u64 {
        self.streams.iter().map(|s| s.1).sum()
    }

    pub fn rng(&self, stream: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// Union of two plans over disjoint stream ids with the same seed.
    pub fn union(&self, other: &SeedPlan) -> Result<SeedPlan> {
        if self.seed != other.seed {
            return Err(Error::InvalidArgument(
                "seed plans use different seeds".into(),
            ));
        }
        let mut streams = self.streams.clone();
        for s in &other.streams {
            if streams.iter().any(|t| t.0 == s.0) {
                return Err(Error::InvalidArgument(format!(
                    "stream {} appears twice",
                    s.0
                )));
            }
            streams.push(*s);
        }
        streams.sort_unstable();
        Ok(SeedPlan {
            seed: self.seed,
            streams,
        })
    }

    /// 64-bit FNV-1a fingerprint of the plan.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.seed);
        for (s, t) in &self.streams {
            eat(*s as u64);
            eat(*t);
        }
        h
    }
}

/// Results that can be pooled across streams.
pub trait Merge: Sized {
    fn merge(&mut self, other: Self) -> Result<()>;
}

/// Work done by one stream.
pub trait StreamKernel: Sync {
    type Output: Merge + Send;
    fn run(&self, stream: u32, trials: u64, rng: &mut ChaCha8Rng) -> Self::Output;
}

/// Runs every stream of `plan` in turn and merges in stream-id order.
pub fn run_sequential<K: StreamKernel>(kernel: &K, plan: &SeedPlan) -> Result<K::Output> {
    let mut outputs: Vec<(u32, K::Output)> = plan
        .streams
        .iter()
        .map(|&(s, t)| (s, kernel.run(s, t, &mut plan.rng(s))))
        .collect();
    merge_in_order(&mut outputs)
}

/// Merges per-stream outputs after sorting by stream id.
pub fn merge_in_order<T: Merge>(outputs: &mut Vec<(u32, T)>) -> Result<T> {
    outputs.sort_by_key(|o| o.0);
    let mut iter = core::mem::take(outputs).into_iter();
    let (_, mut acc) = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty seed plan".into()))?;
    for (_, o) in iter {
        acc.merge(o)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Accumulators

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }
}

/// Sample moments kept per stream. Totals are reduced in stream-id order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAccumulator {
    streams: BTreeMap<u32, Moments>,
}

impl EstimatorAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, stream: u32, x: f64) {
        self.streams.entry(stream).or_default().push(x);
    }

    /// Stream ids in reduction order.
    pub fn merge_log(&self) -> Vec<u32> {
        self.streams.keys().copied().collect()
    }

    pub fn stream(&self, id: u32) -> Option<&Moments> {
        self.streams.get(&id)
    }

    pub fn totals(&self) -> Moments {
        let mut t = Moments::default();
        for m in self.streams.values() {
            t.count += m.count;
            t.sum += m.sum;
            t.sum_sq += m.sum_sq;
        }
        t
    }

    pub fn count(&self) -> u64 {
        self.totals().count
    }

    pub fn mean(&self) -> f64 {
        let t = self.totals();
        t.sum / t.count as f64
    }

    /// Unbiased pooled sample variance.
    pub fn variance(&self) -> f64 {
        let t = self.totals();
        if t.count < 2 {
            return f64::NAN;
        }
        let n = t.count as f64;
        let mean = t.sum / n;
        ((t.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        libm::sqrt(self.variance() / self.count() as f64)
    }

    /// `mean ± z·stderr`.
    pub fn ci(&self, z: f64) -> (f64, f64) {
        let m = self.mean();
        let h = z * self.stderr();
        (m - h, m + h)
    }
}

impl Merge for EstimatorAccumulator {
    fn merge(&mut self, other: Self) -> Result<()> {
        for (id, m) in other.streams {
            if self.streams.insert(id, m).is_some() {
                return Err(Error::InvalidArgument(format!("stream {id} merged twice")));
            }
        }
        Ok(())
    }
}

/// Binomial proportion with a normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn estimate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.estimate();
        libm::sqrt(p * (1.0 - p) / self.trials as f64)
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        let p = self.estimate();
        let h = z * self.stderr();
        (p - h, p + h)
    }
}

fn add_counts(a: &mut [u64], b: &[u64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("histogram shapes differ".into()));
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Ladder epochs and heights

/// One simulated path, run until both `τ⁻` and `τ⁺` are seen or the
/// horizon is reached. `None` marks a censored field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSample {
    pub tau_minus: Option<u64>,
    pub tau_plus: Option<u64>,
    /// `S_{τ⁺}`.
    pub chi_plus: Option<f64>,
    /// `S_{τ⁻-1}` (0 when `τ⁻ = 1`).
    pub pre_passage_position: Option<f64>,
    pub path_horizon: u64,
}

/// Simulates one path; when `trace` is given it receives `S_1, S_2, …`.
pub fn simulate_path<R: Rng + ?Sized>(
    sampler: &Sampler,
    horizon: u64,
    rng: &mut R,
    mut trace: Option<&mut Vec<f64>>,
) -> LadderSample {
    let mut out = LadderSample {
        tau_minus: None,
        tau_plus: None,
        chi_plus: None,
        pre_passage_position: None,
        path_horizon: horizon,
    };
    let mut s = 0.0;
    for n in 1..=horizon {
        let prev = s;
        s += sampler.sample(rng);
        if let Some(t) = trace.as_deref_mut() {
            t.push(s);
        }
        if out.tau_minus.is_none() && s <= 0.0 {
            out.tau_minus = Some(n);
            out.pre_passage_position = Some(prev);
        }
        if out.tau_plus.is_none() && s > 0.0 {
            out.tau_plus = Some(n);
            out.chi_plus = Some(s);
        }
        if out.tau_minus.is_some() && out.tau_plus.is_some() {
            break;
        }
    }
    out
}

/// Geometric grid `10^{k/per_decade}` for `k` in `lo_exp·per_decade ..= hi_exp·per_decade`.
pub fn geometric_grid(lo_exp: i32, hi_exp: i32, per_decade: u32) -> Vec<f64> {
    let d = per_decade as i32;
    (lo_exp * d..=hi_exp * d)
        .map(|k| libm::pow(10.0, k as f64 / d as f64))
        .collect()
}

/// Histograms of `τ⁻`, `τ⁺` and exceedance counts of `χ⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCounts {
    pub trials: u64,
    pub horizon: u64,
    /// `tau_minus[n]`: paths with `τ⁻ = n`, index 0 unused.
    pub tau_minus: Vec<u64>,
    pub censored_minus: u64,
    pub tau_plus: Vec<u64>,
    pub censored_plus: u64,
    pub chi_grid: Vec<f64>,
    /// Paths with `χ⁺ > chi_grid[i]` among those with `τ⁺ ≤ horizon`.
    pub chi_exceed: Vec<u64>,
}

impl LadderCounts {
    pub fn empty(horizon: u64, chi_grid: Vec<f64>) -> Self {
        let h = horizon as usize;
        LadderCounts {
            trials: 0,
            horizon,
            tau_minus: vec![0; h + 1],
            censored_minus: 0,
            tau_plus: vec![0; h + 1],
            censored_plus: 0,
            chi_exceed: vec![0; chi_grid.len()],
            chi_grid,
        }
    }

    pub fn record(&mut self, s: &LadderSample) {
        self.trials += 1;
        match s.tau_minus {
            Some(n) => self.tau_minus[n as usize] += 1,
            None => self.censored_minus += 1,
        }
        match (s.tau_plus, s.chi_plus) {
            (Some(n), Some(chi)) => {
                self.tau_plus[n as usize] += 1;
                for (g, c) in self.chi_grid.iter().zip(self.chi_exceed.iter_mut()) {
                    if chi > *g {
                        *c += 1;
                    } else {
                        break;
                    }
                }
            }
            _ => self.censored_plus += 1,
        }
    }

    /// `P̂(τ⁻ = n)`.
    pub fn tau_minus_at(&self, n: usize) -> Proportion {
        Proportion {
            hits: self.tau_minus[n],
            trials: self.trials,
        }
    }

    /// `P̂(τ⁻ > n)`, counting censored paths as survivors.
    pub fn tau_minus_survival(&self, n: usize) -> Proportion {
        let hits = self.tau_minus[n + 1..].iter().sum::<u64>() + self.censored_minus;
        Proportion {
            hits,
            trials: self.trials,
        }
    }

    pub fn tau_plus_at(&self, n: usize) -> Proportion {
        Proportion {
            hits: self.tau_plus[n],
            trials: self.trials,
        }
    }

    pub fn tau_plus_survival(&self, n: usize) -> Proportion {
        let hits = self.tau_plus[n + 1..].iter().sum::<u64>() + self.censored_plus;
        Proportion {
            hits,
            trials: self.trials,
        }
    }

    /// `(x, P̂(χ⁺ > x | τ⁺ ≤ horizon))` on the grid.
    pub fn chi_tail(&self) -> Vec<(f64, Proportion)> {
        let observed = self.trials - self.censored_plus;
        self.chi_grid
            .iter()
            .zip(&self.chi_exceed)
            .map(|(x, c)| {
                (
                    *x,
                    Proportion {
                        hits: *c,
                        trials: observed,
                    },
                )
            })
            .collect()
    }
}

impl Merge for LadderCounts {
    fn merge(&mut self, other: Self) -> Result<()> {
        if self.horizon != other.horizon || self.chi_grid != other.chi_grid {
            return Err(Error::InvalidArgument(
                "ladder histograms have different shapes".into(),
            ));
        }
        self.trials += other.trials;
        self.censored_minus += other.censored_minus;
        self.censored_plus += other.censored_plus;
        add_counts(&mut self.tau_minus, &other.tau_minus)?;
        add_counts(&mut self.tau_plus, &other.tau_plus)?;
        add_counts(&mut self.chi_exceed, &other.chi_exceed)
    }
}

/// Kernel for [`LadderCounts`].
#[derive(Debug, Clone)]
pub struct LadderTask {
    sampler: Sampler,
    pub horizon: u64,
    pub chi_grid: Vec<f64>,
}

impl LadderTask {
    pub fn new(model: &IncrementModel, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(LadderTask {
            sampler: model.sampler(),
            horizon,
            chi_grid: geometric_grid(-3, 6, 10),
        })
    }
}

impl StreamKernel for LadderTask {
    type Output = LadderCounts;
    fn run(&self, _stream: u32, trials: u64, rng: &mut ChaCha8Rng) -> LadderCounts {
        let mut counts = LadderCounts::empty(self.horizon, self.chi_grid.clone());
        for _ in 0..trials {
            let s = simulate_path(&self.sampler, self.horizon, rng, None);
            counts.record(&s);
        }
        counts
    }
}

/// Histograms of `τ⁻`, `τ⁺`, `χ⁺` for `trials` paths up to `horizon`.
pub fn simulate_ladders(
    model: &IncrementModel,
    horizon: u64,
    plan: &SeedPlan,
) -> Result<LadderCounts> {
    run_sequential(&LadderTask::new(model, horizon)?, plan)
}

// ---------------------------------------------------------------------------
// Meander functional

/// Per-stream output of [`MeanderTask`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanderSums {
    pub trials: u64,
    pub accepted: u64,
    /// `(n+1) P(X ≤ -S_n) / q` on accepted paths.
    pub kernel: EstimatorAccumulator,
    /// `(S_n / c_n)^{-α}` on accepted paths.
    pub raw: EstimatorAccumulator,
}

impl Merge for MeanderSums {
    fn merge(&mut self, other: Self) -> Result<()> {
        self.trials += other.trials;
        self.accepted += other.accepted;
        self.kernel.merge(other.kernel)?;
        self.raw.merge(other.raw)
    }
}

/// Rejection sampler on `{τ⁻ > n}` for the meander identity
/// `E (M⁺)^{-α} = (1-ρ)/q`.
///
/// The primary estimator is `(n+1) P(X ≤ -S_n) / q`, whose conditional
/// mean is exactly `(n+1) P(τ⁻ = n+1) / (q P(τ⁻ > n))` and tends to
/// `(1-ρ)/q`; for large `S_n` it is `(S_n/c_n)^{-α}` up to the tail's
/// slowly varying factor. The raw functional is kept as a diagnostic only:
/// at finite `n` the density of `S_n` near 0 is bounded away from zero, so
/// its variance is infinite for α ≥ 1/2 and its mean for α ≥ 1.
#[derive(Debug, Clone)]
pub struct MeanderTask {
    model: IncrementModel,
    sampler: Sampler,
    pub n: u64,
    pub c_n: f64,
}

impl MeanderTask {
    pub fn new(model: &IncrementModel, n: u64) -> Result<Self> {
        if model.alpha() >= 2.0 {
            return Err(Error::InvalidModel(
                "the meander identity needs alpha < 2".into(),
            ));
        }
        if model.q() == 0.0 {
            return Err(Error::Degenerate("identity undefined (q = 0)".into()));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(MeanderTask {
            model: model.clone(),
            sampler: model.sampler(),
            n,
            c_n: model.normalizing_sequence(n),
        })
    }

    pub fn target(&self) -> f64 {
        (1.0 - self.model.rho()) / self.model.q()
    }
}

impl StreamKernel for MeanderTask {
    type Output = MeanderSums;
    fn run(&self, stream: u32, trials: u64, rng: &mut ChaCha8Rng) -> MeanderSums {
        let mut out = MeanderSums {
            trials,
            ..MeanderSums::default()
        };
        let alpha = self.model.alpha();
        let scale = (self.n + 1) as f64 / self.model.q();
        for _ in 0..trials {
            let mut s = 0.0;
            let mut alive = true;
            for _ in 0..self.n {
                s += self.sampler.sample(rng);
                if s <= 0.0 {
                    alive = false;
                    break;
                }
            }
            if alive {
                out.accepted += 1;
                out.kernel.push(stream, scale * self.model.cdf(-s));
                out.raw.push(stream, libm::pow(s / self.c_n, -alpha));
            }
        }
        // Streams with no accepted path still appear in the merge log.
        out.kernel.streams.entry(stream).or_default();
        out.raw.streams.entry(stream).or_default();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanderEstimate {
    pub n: u64,
    pub trials: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub target: f64,
    pub raw_estimate: f64,
    pub raw_stderr: f64,
}

impl MeanderTask {
    /// Summarizes pooled sums, enforcing the acceptance guard.
    pub fn estimate(&self, sums: &MeanderSums) -> Result<MeanderEstimate> {
        let rate = sums.accepted as f64 / sums.trials.max(1) as f64;
        if sums.accepted == 0 || rate < ACCEPTANCE_FLOOR {
            return Err(Error::Acceptance {
                rate,
                floor: ACCEPTANCE_FLOOR,
                hint: format!("use a smaller n than {}", self.n),
            });
        }
        let (lo, hi) = sums.kernel.ci(Z95);
        Ok(MeanderEstimate {
            n: self.n,
            trials: sums.trials,
            accepted: sums.accepted,
            acceptance_rate: rate,
            estimate: sums.kernel.mean(),
            stderr: sums.kernel.stderr(),
            ci_lo: lo,
            ci_hi: hi,
            target: self.target(),
            raw_estimate: sums.raw.mean(),
            raw_stderr: sums.raw.stderr(),
        })
    }
}

/// Sequential convenience wrapper around [`MeanderTask`].
pub fn meander_functional(
    model: &IncrementModel,
    n: u64,
    plan: &SeedPlan,
) -> Result<MeanderEstimate> {
    let task = MeanderTask::new(model, n)?;
    let sums = run_sequential(&task, plan)?;
    task.estimate(&sums)
}

// ---------------------------------------------------------------------------
// Conditioned endpoint

/// Histogram of `S_{n-1}` on `{τ⁻ = n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointHistogram {
    pub n: u64,
    pub c_n: f64,
    pub trials: u64,
    pub accepted: u64,
    /// Edges of the geometric bins for `S_{n-1}/c_n` (10 per decade on
    /// `[1e-3, 1e3]`).
    pub scaled_edges: Vec<f64>,
    /// `scaled_counts[i]` counts `edges[i] ≤ S/c_n < edges[i+1]`.
    pub scaled_counts: Vec<u64>,
    pub scaled_below: u64,
    pub scaled_above: u64,
    /// Unit bins `[k, k+1)` for `S_{n-1}` on `[0, 100)`.
    pub unit_counts: Vec<u64>,
    pub unit_above: u64,
    pub epsilon: f64,
    pub n_fixed: f64,
    /// Accepted samples with `ε c_n < S < c_n / ε`.
    pub in_scale_window: u64,
    /// Accepted samples with `0 ≤ S ≤ n_fixed`.
    pub in_fixed_window: u64,
}

impl EndpointHistogram {
    pub fn empty(n: u64, c_n: f64, epsilon: f64, n_fixed: f64) -> Self {
        let scaled_edges = geometric_grid(-3, 3, 10);
        EndpointHistogram {
            n,
            c_n,
            trials: 0,
            accepted: 0,
            scaled_counts: vec![0; scaled_edges.len() - 1],
            scaled_edges,
            scaled_below: 0,
            scaled_above: 0,
            unit_counts: vec![0; 100],
            unit_above: 0,
            epsilon,
            n_fixed,
            in_scale_window: 0,
            in_fixed_window: 0,
        }
    }

    pub fn record(&mut self, s: f64) {
        self.accepted += 1;
        let r = s / self.c_n;
        let edges = &self.scaled_edges;
        if r < edges[0] {
            self.scaled_below += 1;
        } else if r >= edges[edges.len() - 1] {
            self.scaled_above += 1;
        } else {
            let i = edges.partition_point(|e| *e <= r) - 1;
            self.scaled_counts[i] += 1;
        }
        if s < 100.0 {
            self.unit_counts[libm::floor(s.max(0.0)) as usize] += 1;
        } else {
            self.unit_above += 1;
        }
        if s > self.epsilon * self.c_n && s < self.c_n / self.epsilon {
            self.in_scale_window += 1;
        }
        if (0.0..=self.n_fixed).contains(&s) {
            self.in_fixed_window += 1;
        }
    }

    /// Geometric-bin masses normalized to total mass 1 over accepted samples
    /// (under- and overflow included as the first and last entries).
    pub fn normalized_scaled(&self) -> Vec<f64> {
        let total = self.accepted as f64;
        let mut out = vec![self.scaled_below as f64 / total];
        out.extend(self.scaled_counts.iter().map(|c| *c as f64 / total));
        out.push(self.scaled_above as f64 / total);
        out
    }

    pub fn scale_fraction(&self) -> Proportion {
        Proportion {
            hits: self.in_scale_window,
            trials: self.accepted,
        }
    }

    pub fn fixed_fraction(&self) -> Proportion {
        Proportion {
            hits: self.in_fixed_window,
            trials: self.accepted,
        }
    }
}

impl Merge for EndpointHistogram {
    fn merge(&mut self, other: Self) -> Result<()> {
        if self.n != other.n
            || self.c_n != other.c_n
            || self.epsilon != other.epsilon
            || self.n_fixed != other.n_fixed
        {
            return Err(Error::InvalidArgument(
                "endpoint histograms have different shapes".into(),
            ));
        }
        self.trials += other.trials;
        self.accepted += other.accepted;
        self.scaled_below += other.scaled_below;
        self.scaled_above += other.scaled_above;
        self.unit_above += other.unit_above;
        self.in_scale_window += other.in_scale_window;
        self.in_fixed_window += other.in_fixed_window;
        add_counts(&mut self.scaled_counts, &other.scaled_counts)?;
        add_counts(&mut self.unit_counts, &other.unit_counts)
    }
}

/// Pre-passage position `S_{n-1}` on `{τ⁻ = n}`.
#[derive(Debug, Clone)]
pub struct EndpointTask {
    sampler: Sampler,
    pub n: u64,
    pub c_n: f64,
    pub epsilon: f64,
    pub n_fixed: f64,
}

impl EndpointTask {
    pub fn new(model: &IncrementModel, n: u64, epsilon: f64, n_fixed: f64) -> Result<Self> {
        if model.alpha() >= 2.0 {
            return Err(Error::InvalidModel(
                "conditioned endpoints need alpha < 2".into(),
            ));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("n must be at least 2".into()));
        }
        Ok(EndpointTask {
            sampler: model.sampler(),
            n,
            c_n: model.normalizing_sequence(n),
            epsilon,
            n_fixed,
        })
    }

    /// Checks that at least one path was accepted.
    pub fn check(&self, h: &EndpointHistogram) -> Result<()> {
        if h.accepted == 0 {
            Err(Error::Acceptance {
                rate: 0.0,
                floor: 1.0 / h.trials.max(1) as f64,
                hint: format!("no path had τ⁻ = {} in {} trials", self.n, h.trials),
            })
        } else {
            Ok(())
        }
    }
}

impl StreamKernel for EndpointTask {
    type Output = EndpointHistogram;
    fn run(&self, _stream: u32, trials: u64, rng: &mut ChaCha8Rng) -> EndpointHistogram {
        let mut h = EndpointHistogram::empty(self.n, self.c_n, self.epsilon, self.n_fixed);
        h.trials = trials;
        for _ in 0..trials {
            let mut s = 0.0;
            for k in 1..=self.n {
                let prev = s;
                s += self.sampler.sample(rng);
                if s <= 0.0 {
                    if k == self.n {
                        h.record(prev);
                    }
                    break;
                }
            }
        }
        h
    }
}

pub fn conditioned_endpoint(
    model: &IncrementModel,
    n: u64,
    epsilon: f64,
    n_fixed: f64,
    plan: &SeedPlan,
) -> Result<EndpointHistogram> {
    let task = EndpointTask::new(model, n, epsilon, n_fixed)?;
    let h = run_sequential(&task, plan)?;
    task.check(&h)?;
    Ok(h)
}

// ---------------------------------------------------------------------------
// Sign probabilities

/// Counts of `S_n > 0` and `S_n = 0` for `n = 1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCounts {
    pub trials: u64,
    pub positive: Vec<u64>,
    pub zero: Vec<u64>,
}

impl SignCounts {
    pub fn into_sequence(self) -> SignSequence<f64> {
        let t = self.trials as f64;
        let gt: Vec<f64> = self.positive.iter().map(|c| *c as f64 / t).collect();
        let eq: Vec<f64> = self.zero.iter().map(|c| *c as f64 / t).collect();
        let stderr = gt.iter().map(|p| libm::sqrt(p * (1.0 - p) / t)).collect();
        let mut s = SignSequence::from_gt_eq(gt, eq, SignSource::MonteCarlo);
        s.stderr = Some(stderr);
        s
    }
}

impl Merge for SignCounts {
    fn merge(&mut self, other: Self) -> Result<()> {
        self.trials += other.trials;
        add_counts(&mut self.positive, &other.positive)?;
        add_counts(&mut self.zero, &other.zero)
    }
}

#[derive(Debug, Clone)]
pub struct SignTask {
    sampler: Sampler,
    pub order: usize,
}

impl SignTask {
    pub fn new(model: &IncrementModel, order: usize) -> Result<Self> {
        if model.is_lattice() {
            return Err(Error::InvalidModel(
                "lattice models have exact sign probabilities; use the lattice routines"
                    .to_string(),
            ));
        }
        Ok(SignTask {
            sampler: model.sampler(),
            order,
        })
    }
}

impl StreamKernel for SignTask {
    type Output = SignCounts;
    fn run(&self, _stream: u32, trials: u64, rng: &mut ChaCha8Rng) -> SignCounts {
        let mut out = SignCounts {
            trials,
            positive: vec![0; self.order],
            zero: vec![0; self.order],
        };
        for _ in 0..trials {
            let mut s = 0.0;
            for n in 0..self.order {
                s += self.sampler.sample(rng);
                if s > 0.0 {
                    out.positive[n] += 1;
                } else if s == 0.0 {
                    out.zero[n] += 1;
                }
            }
        }
        out
    }
}

pub fn sign_probabilities_mc(
    model: &IncrementModel,
    order: usize,
    plan: &SeedPlan,
) -> Result<SignSequence<f64>> {
    Ok(run_sequential(&SignTask::new(model, order)?, plan)?.into_sequence())
}
