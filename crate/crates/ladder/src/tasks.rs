//! Dispatch of configured tasks to the core routines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context as _};
use ladder_core::asymptotics::{
    calibrate, spitzer_doney_diagnostic, verify_local_law_minus, verify_local_law_plus,
    verify_omega_ratio, verify_renewal_asymptotics, verify_small_deviations, AsymptoticReport,
    OmegaSum, TheoremId, ToleranceKind, ToleranceSchedule, Verdict,
};
use ladder_core::increments::ModelKind;
use ladder_core::lattice::{
    killed_walk, ladder_height_law, omega_at_one, renewal_function, sign_sequence, KilledWalkTable,
    RenewalOptions, DEFAULT_CELL_LIMIT,
};
use ladder_core::montecarlo::{EndpointTask, LadderTask, MeanderTask, SeedPlan, SignTask};
use ladder_core::series::{
    omega_series, t_minus_pmf, tau_minus_pmf, Epoch, LadderEpochLaw, SignSequence, SignSource,
};
use ladder_core::{IncrementModel, ModelSpec};
use serde::Serialize;

use crate::cache::TableCache;
use crate::config::{ExperimentConfig, Task};
use crate::io::{fmt_f64, plot_csv, series_csv, table_csv, ArtifactWriter};
use crate::manifest::{config_hash, LabeledPlan, RunManifest, StageTiming, MANIFEST_FILE};
use crate::runner::run_parallel;

/// Columns kept from killed-walk tables in exported CSVs.
pub const EXPORT_COLS: usize = 64;
/// Absolute tolerance of the Cesàro check.
pub const SPITZER_TOL: f64 = 0.05;
pub const OMEGA_TOL: f64 = 0.05;
pub const SMALL_DEV_TOL: f64 = 0.05;
pub const SMALL_DEV_J: u64 = 10;
pub const DEFAULT_X_MAX: usize = 1000;
/// Stream ids of sub-tasks are offset by multiples of this.
const STREAM_BLOCK: u32 = 1 << 16;

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.manifest.all_passed()
    }
}

/// One MC record in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct McRecord {
    pub quantity: String,
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed_plan_hash: String,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    spec: ModelSpec,
    model: IncrementModel,
    writer: ArtifactWriter,
    cache: TableCache,
    stages: Vec<StageTiming>,
    plans: Vec<LabeledPlan>,
    verdicts: BTreeMap<String, Verdict>,
    notes: Vec<String>,
    signs: Option<SignSequence<f64>>,
}

impl Ctx<'_> {
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> anyhow::Result<T>,
    ) -> anyhow::Result<T> {
        let start = Instant::now();
        let out = f(self).with_context(|| format!("stage `{name}`"));
        self.stages.push(StageTiming {
            name: name.to_string(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Seed plan for sub-task `block`; streams never overlap across blocks.
    fn plan(&mut self, label: &str, block: u32) -> anyhow::Result<SeedPlan> {
        let seed = self
            .cfg
            .seed
            .ok_or_else(|| anyhow!("config field `seed`: required for {label}"))?;
        let streams = self.cfg.streams();
        let total = self.cfg.trials();
        let base = total / streams as u64;
        let extra = total % streams as u64;
        let plan = SeedPlan {
            seed,
            streams: (0..streams)
                .map(|s| {
                    (
                        block * STREAM_BLOCK + s,
                        base + u64::from((s as u64) < extra),
                    )
                })
                .collect(),
        };
        self.plans.push(LabeledPlan {
            label: label.to_string(),
            fingerprint: format!("{:016x}", plan.fingerprint()),
            plan: plan.clone(),
        });
        Ok(plan)
    }

    fn workers(&self) -> usize {
        self.cfg.workers()
    }

    fn killed(&mut self, n: usize, stored: usize) -> anyhow::Result<KilledWalkTable<f64>> {
        let j_max = match (self.cfg.j_max, max_up(&self.model)) {
            (Some(j), _) => j,
            (None, Some(up)) => (n * up).max(1),
            (None, None) => {
                return Err(anyhow!(
                    "config field `j_max`: required for unbounded lattice supports"
                ))
            }
        };
        let stored = stored.min(j_max);
        if let Some(t) = self.cache.load(&self.spec, n, j_max, stored) {
            self.notes.push(format!(
                "killed-walk table n={n} j_max={j_max} loaded from cache"
            ));
            return Ok(t);
        }
        let t = killed_walk(&self.model, n, Some(j_max), Some(stored))?;
        if let Err(e) = self.cache.store(&self.spec, &t) {
            self.notes.push(format!("table cache not written: {e}"));
        }
        Ok(t)
    }

    /// Sign probabilities to order `n`: exact for lattice models, Monte Carlo
    /// otherwise.
    fn signs(&mut self, n: usize) -> anyhow::Result<SignSequence<f64>> {
        if let Some(s) = &self.signs {
            if s.len() >= n {
                return Ok(s.clone());
            }
        }
        let s = if self.model.is_lattice() {
            sign_sequence(&self.model, n, DEFAULT_CELL_LIMIT)?
        } else {
            let plan = self.plan("signs", 3)?;
            run_parallel(&SignTask::new(&self.model, n)?, &plan, self.workers())?.into_sequence()
        };
        self.signs = Some(s.clone());
        Ok(s)
    }
}

fn max_up(model: &IncrementModel) -> Option<usize> {
    match model.kind() {
        ModelKind::FiniteLattice => model.lattice_pmf().map(|p| p.max_value().max(1) as usize),
        _ => None,
    }
}

/// Runs `cfg` and writes its artifacts under `root/<output>`.
///
/// On error nothing is left behind; a run whose verdicts fail still writes
/// its artifacts.
pub fn run(cfg: &ExperimentConfig, root: &Path) -> anyhow::Result<RunOutcome> {
    cfg.validate()?;
    let spec = cfg.model_spec()?;
    let model = cfg.build_model()?;
    let target = root.join(cfg.output_dir());
    if let Some(parent) = target.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut ctx = Ctx {
        cfg,
        spec,
        model,
        writer: ArtifactWriter::new(&target)?,
        cache: TableCache::new(&root.join(".cache")),
        stages: Vec::new(),
        plans: Vec::new(),
        verdicts: BTreeMap::new(),
        notes: Vec::new(),
        signs: None,
    };
    match cfg.task {
        Task::Exact => exact(&mut ctx)?,
        Task::Series => series(&mut ctx)?,
        Task::Mc => mc(&mut ctx)?,
        Task::VerifyAll | Task::Verify(_) => {
            for t in cfg.task.theorems() {
                verify_one(&mut ctx, t)?;
            }
        }
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        workers: cfg.workers(),
        seed_plans: ctx.plans,
        stages: ctx.stages,
        outputs: ctx.writer.digests().clone(),
        verdicts: ctx.verdicts,
        notes: ctx.notes,
    };
    let text = crate::io::json_string(&manifest)?;
    let dir = ctx.writer.commit(MANIFEST_FILE, &text)?;
    Ok(RunOutcome { dir, manifest })
}

fn exact(ctx: &mut Ctx) -> anyhow::Result<()> {
    let n = ctx.cfg.n.unwrap_or(512);
    let t = ctx.stage("killed-walk", |c| c.killed(n, EXPORT_COLS))?;
    ctx.stage("write-tables", |c| {
        c.writer
            .write("tables/tau_minus_pmf.csv", series_csv(&t.pmf))?;
        c.writer
            .write("tables/tau_minus_survival.csv", series_csv(&t.survival))?;
        c.writer.write("tables/leaked.csv", series_csv(&t.leaked))?;
        let (b, cols) = (&t.b, t.stored_cols);
        let rows = (1..b.len()).flat_map(|m| (1..=cols).map(move |j| (m, j, b[m][j])));
        c.writer.write("tables/killed_b.csv", table_csv(rows))?;
        if t.leaked_total > 0.0 {
            c.notes.push(format!(
                "killed walk leaked mass {:e} above j_max",
                t.leaked_total
            ));
        }
        Ok(())
    })?;
    if ctx.model.kind() == ModelKind::FiniteLattice {
        let heights = ctx.stage("ladder-heights", |c| Ok(ladder_height_law(&c.model)?))?;
        ctx.writer
            .write("tables/ladder_height_pmf.csv", series_csv(&heights))?;
    }
    if let Some(x_max) = ctx.cfg.x_max {
        let opts = RenewalOptions {
            n_dual: n,
            j_max: ctx.cfg.j_max,
            ..RenewalOptions::default()
        };
        let r = ctx.stage("renewal", |c| Ok(renewal_function(&c.model, x_max, &opts)?))?;
        ctx.writer.write("tables/renewal_h.csv", series_csv(&r.h))?;
        ctx.writer
            .write("tables/renewal_h_dual.csv", series_csv(&r.h_dual))?;
        if let Some(d) = r.matched_difference {
            ctx.notes.push(format!(
                "duality vs ladder-height renewal, matched truncation: max gap {d:e}"
            ));
        }
    }
    Ok(())
}

fn series(ctx: &mut Ctx) -> anyhow::Result<()> {
    let n = ctx.cfg.order();
    let signs = ctx.stage("signs", |c| c.signs(n))?;
    ctx.stage("series", |c| {
        let minus = LadderEpochLaw::from_signs(&signs, n, Epoch::WeakDescending)?;
        let plus = LadderEpochLaw::from_signs(&signs, n, Epoch::StrictAscending)?;
        let omega = omega_series(&signs, n)?;
        let tau = tau_minus_pmf(&signs, n)?;
        let t_minus = t_minus_pmf(&tau, &omega);
        let mut gt = vec![0.0];
        gt.extend_from_slice(&signs.gt_zero[..n]);
        let mut eq = vec![1.0];
        eq.extend_from_slice(&signs.eq_zero[..n]);
        let w = &mut c.writer;
        w.write("series/p_gt_zero.csv", series_csv(&gt))?;
        w.write("series/p_eq_zero.csv", series_csv(&eq))?;
        w.write("series/tau_minus_pmf.csv", series_csv(&minus.pmf))?;
        w.write("series/tau_minus_survival.csv", series_csv(&minus.survival))?;
        w.write("series/tau_plus_pmf.csv", series_csv(&plus.pmf))?;
        w.write("series/tau_plus_survival.csv", series_csv(&plus.survival))?;
        w.write("series/omega.csv", series_csv(omega.coeffs()))?;
        w.write("series/t_minus_pmf.csv", series_csv(t_minus.coeffs()))?;
        if let (Some(pe), Some(se)) = (&minus.pmf_err, &minus.survival_err) {
            w.write("series/tau_minus_pmf_err.csv", series_csv(pe))?;
            w.write("series/tau_minus_survival_err.csv", series_csv(se))?;
        }
        if signs.source != SignSource::Exact {
            c.notes.push("sign probabilities estimated by Monte Carlo; *_err.csv hold first-order error bounds".into());
        }
        Ok(())
    })
}

fn mc(ctx: &mut Ctx) -> anyhow::Result<()> {
    let s = ctx.cfg.mc.clone();
    let plan = ctx.plan("ladder", 0)?;
    let hash = format!("{:016x}", plan.fingerprint());
    let counts = ctx.stage("mc-ladder", |c| {
        run_parallel(&LadderTask::new(&c.model, s.horizon)?, &plan, c.workers())
    })?;
    let mut records = Vec::new();
    let mut n = 1;
    while n <= s.horizon as usize {
        for (name, p) in [
            ("P(tau- > n)", counts.tau_minus_survival(n)),
            ("P(tau+ > n)", counts.tau_plus_survival(n)),
        ] {
            records.push(McRecord {
                quantity: name.into(),
                n: n as u64,
                estimate: p.estimate(),
                stderr: p.stderr(),
                trials: counts.trials,
                seed_plan_hash: hash.clone(),
            });
        }
        n *= 2;
    }
    ctx.writer.write_json("mc/ladder.json", &records)?;
    let mut chi = String::from("x,estimate,stderr\n");
    for (x, p) in counts.chi_tail() {
        chi += &format!(
            "{},{},{}\n",
            fmt_f64(x),
            fmt_f64(p.estimate()),
            fmt_f64(p.stderr())
        );
    }
    ctx.writer.write("mc/chi_tail.csv", chi)?;

    match MeanderTask::new(&ctx.model, s.meander_n) {
        Ok(task) => {
            let plan = ctx.plan("meander", 1)?;
            let est = ctx.stage("mc-meander", |c| {
                let sums = run_parallel(&task, &plan, c.workers())?;
                Ok(task.estimate(&sums)?)
            })?;
            ctx.writer.write_json("mc/meander.json", &est)?;
        }
        Err(e) => ctx.notes.push(format!("meander functional skipped: {e}")),
    }

    match EndpointTask::new(&ctx.model, s.endpoint_n, s.epsilon, s.n_fixed) {
        Ok(task) => {
            let plan = ctx.plan("endpoint", 2)?;
            let h = ctx.stage("mc-endpoint", |c| {
                let h = run_parallel(&task, &plan, c.workers())?;
                task.check(&h)?;
                Ok(h)
            })?;
            let mut csv = String::from("scale,lo,hi,count\n");
            for (i, c) in h.scaled_counts.iter().enumerate() {
                csv += &format!(
                    "scaled,{},{},{c}\n",
                    fmt_f64(h.scaled_edges[i]),
                    fmt_f64(h.scaled_edges[i + 1])
                );
            }
            for (k, c) in h.unit_counts.iter().enumerate() {
                csv += &format!(
                    "unit,{},{},{c}\n",
                    fmt_f64(k as f64),
                    fmt_f64(k as f64 + 1.0)
                );
            }
            ctx.writer.write("mc/endpoint_hist.csv", csv)?;
            let hash = format!("{:016x}", plan.fingerprint());
            let recs = [
                ("fraction in (eps c_n, c_n / eps)", h.scale_fraction()),
                ("fraction in [0, n_fixed]", h.fixed_fraction()),
            ]
            .map(|(q, p)| McRecord {
                quantity: q.into(),
                n: s.endpoint_n,
                estimate: p.estimate(),
                stderr: p.stderr(),
                trials: h.trials,
                seed_plan_hash: hash.clone(),
            });
            ctx.writer.write_json("mc/endpoint.json", &recs)?;
        }
        Err(e) => ctx.notes.push(format!("conditioned endpoint skipped: {e}")),
    }
    Ok(())
}

fn verify_one(ctx: &mut Ctx, id: TheoremId) -> anyhow::Result<()> {
    let report = match ctx.stage(id.as_str(), |c| build_report(c, id)) {
        Ok(r) => r,
        Err(e) => {
            // Keep one report per requested id; the failure is the verdict.
            let mut r = insufficient(id, &ctx.spec);
            r.notes.push(format!("{e:#}"));
            r
        }
    };
    let report = report.with_model(&ctx.spec);
    ctx.verdicts.insert(id.as_str().to_string(), report.verdict);
    ctx.writer
        .write_json(&format!("reports/{id}.json"), &report)?;
    ctx.writer
        .write(&format!("reports/{id}.csv"), plot_csv(&report))?;
    ctx.writer
        .write(&format!("reports/{id}.txt"), report.to_string())?;
    Ok(())
}

fn insufficient(id: TheoremId, spec: &ModelSpec) -> AsymptoticReport {
    // An empty report decides to `Insufficient`.
    let mut r = spitzer_doney_diagnostic(
        &SignSequence::from_gt_eq(Vec::new(), Vec::new(), SignSource::Exact),
        0.5,
        &[],
        0.0,
    );
    r.theorem = id;
    r.with_model(spec)
}

fn schedule_for(signs: &SignSequence<f64>) -> ToleranceSchedule {
    if signs.source == SignSource::MonteCarlo {
        ToleranceSchedule::monte_carlo()
    } else {
        ToleranceSchedule::exact_lattice()
    }
}

fn build_report(ctx: &mut Ctx, id: TheoremId) -> anyhow::Result<AsymptoticReport> {
    let n = ctx.cfg.order();
    let grid = ctx.cfg.grid();
    let rho = ctx.model.rho();
    let period = ctx.model.period();
    Ok(match id {
        TheoremId::Main | TheoremId::MainPrime => {
            let signs = ctx.signs(n)?;
            let schedule = schedule_for(&signs);
            if id == TheoremId::Main {
                let law = LadderEpochLaw::from_signs(&signs, n, Epoch::WeakDescending)?;
                let mut r = verify_local_law_minus(&law, rho, &grid, schedule, period);
                if ctx.model.alpha() >= 2.0 {
                    // Constant of the n^{-3/2} law, reported without a target.
                    if let Some(last) = r.last().map(|row| row.n) {
                        let v = (last as f64).powf(1.5) * law.pmf[last as usize];
                        r.metadata
                            .insert("n^1.5 P(tau- = n) at largest n".into(), v);
                    }
                }
                r
            } else {
                let law = LadderEpochLaw::from_signs(&signs, n, Epoch::StrictAscending)?;
                verify_local_law_plus(&law, rho, &grid, schedule, period)
            }
        }
        TheoremId::OmegaRatio => {
            let signs = ctx.signs(n)?;
            let tau = tau_minus_pmf(&signs, n)?;
            let omega = omega_series(&signs, n)?;
            let t = t_minus_pmf(&tau, &omega);
            let sum = if !ctx.model.is_lattice() {
                OmegaSum::cross_checked(
                    1.0,
                    omega.coeffs(),
                    1,
                    "atomless: omega is a unit mass at 0",
                    1e-12,
                )?
            } else if ctx.model.kind() == ModelKind::FiniteLattice {
                let value = omega_at_one(&ctx.model)?;
                OmegaSum::cross_checked(value, omega.coeffs(), period, "Fourier inversion", 1e-6)?
            } else {
                let k = omega.order();
                let partial: f64 = omega.coeffs().iter().sum();
                let d = period as usize;
                let tail =
                    2.0 * k as f64 * omega.coeffs()[k + 1 - d..].iter().sum::<f64>() / d as f64;
                OmegaSum {
                    value: partial + tail,
                    partial_sum: partial,
                    tail_estimate: tail,
                    route: "partial sum plus k^{-3/2} tail".into(),
                }
            };
            let schedule = ToleranceSchedule::constant(ToleranceKind::Relative, OMEGA_TOL);
            verify_omega_ratio(t.coeffs(), tau.coeffs(), &sum, &grid, schedule, period)
        }
        TheoremId::SmallDev => {
            if !ctx.model.is_lattice() {
                return Err(anyhow!(
                    "conditioned local probabilities need a lattice model"
                ));
            }
            let m = ctx.cfg.small_dev_n.unwrap_or(n.min(2000));
            let killed = ctx.killed(m, SMALL_DEV_J as usize)?;
            let opts = RenewalOptions {
                n_dual: n,
                j_max: ctx.cfg.j_max,
                ..RenewalOptions::default()
            };
            let h = renewal_function(&ctx.model, SMALL_DEV_J as usize, &opts)?;
            let signs = ctx.signs(n.max(m))?;
            let calib = calibrate(&ctx.model, m as u64, signs.eq_zero[m - 1])?;
            verify_small_deviations(
                &ctx.model,
                &killed,
                &h,
                &calib,
                m as u64,
                SMALL_DEV_J,
                SMALL_DEV_TOL,
            )?
        }
        TheoremId::Renewal => {
            if !ctx.model.is_lattice() {
                return Err(anyhow!(
                    "the renewal function is computed for lattice models only"
                ));
            }
            let x_max = ctx.cfg.x_max.unwrap_or(DEFAULT_X_MAX);
            let opts = RenewalOptions {
                n_dual: n,
                j_max: ctx.cfg.j_max,
                ..RenewalOptions::default()
            };
            let h = renewal_function(&ctx.model, x_max, &opts)?;
            verify_renewal_asymptotics(&h, &ctx.model)?
        }
        TheoremId::Spitzer => {
            let signs = ctx.signs(n)?;
            spitzer_doney_diagnostic(&signs, rho, &grid, SPITZER_TOL)
        }
    })
}
