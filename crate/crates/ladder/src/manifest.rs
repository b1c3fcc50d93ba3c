//! Run manifests: what was run, with which seeds, and what it produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use ladder_core::asymptotics::Verdict;
use ladder_core::montecarlo::SeedPlan;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::io::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPlan {
    pub label: String,
    pub fingerprint: String,
    pub plan: SeedPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// SHA-256 of the config in canonical TOML form.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub workers: usize,
    pub seed_plans: Vec<LabeledPlan>,
    pub stages: Vec<StageTiming>,
    /// Relative path to SHA-256 for every artifact.
    pub outputs: BTreeMap<String, String>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub notes: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.to_toml().as_bytes())
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.values().all(|v| v.passed())
    }

    /// Recomputes artifact digests under `dir`; returns the mismatches.
    pub fn check_outputs(&self, dir: &Path) -> Vec<(String, String)> {
        let mut bad = Vec::new();
        for (rel, digest) in &self.outputs {
            match fs::read(dir.join(rel)) {
                Ok(bytes) if &sha256_hex(&bytes) == digest => {}
                Ok(_) => bad.push((rel.clone(), "digest mismatch".into())),
                Err(e) => bad.push((rel.clone(), e.to_string())),
            }
        }
        bad
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "run `{}` (task {}, ladder {}, {} worker(s))\nconfig sha256 {}\n",
            self.config.name, self.config.task, self.tool_version, self.workers, self.config_hash
        );
        for p in &self.seed_plans {
            s += &format!(
                "seed plan {}: seed {}, {} streams, {} trials, fingerprint {}\n",
                p.label,
                p.plan.seed,
                p.plan.streams.len(),
                p.plan.total_trials(),
                p.fingerprint
            );
        }
        for st in &self.stages {
            s += &format!("stage {:<14} {:>10.3} s\n", st.name, st.wall_seconds);
        }
        for (rel, d) in &self.outputs {
            s += &format!("{d}  {rel}\n");
        }
        for (id, v) in &self.verdicts {
            s += &format!("verdict {id}: {v:?}\n");
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }
}
