//! Experiment configuration files (TOML).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ladder_core::asymptotics::TheoremId;
use ladder_core::{IncrementModel, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::presets;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    /// Killed-walk tables and the renewal function.
    Exact,
    /// Ladder-epoch series from sign probabilities.
    Series,
    /// Monte Carlo ladder statistics, meander functional, endpoints.
    Mc,
    VerifyAll,
    Verify(TheoremId),
}

impl Task {
    pub fn theorems(self) -> Vec<TheoremId> {
        match self {
            Task::VerifyAll => TheoremId::ALL.to_vec(),
            Task::Verify(t) => vec![t],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Exact => f.write_str("exact"),
            Task::Series => f.write_str("series"),
            Task::Mc => f.write_str("mc"),
            Task::VerifyAll => f.write_str("verify-all"),
            Task::Verify(t) => write!(f, "verify:{t}"),
        }
    }
}

impl FromStr for Task {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "exact" => Ok(Task::Exact),
            "series" => Ok(Task::Series),
            "mc" => Ok(Task::Mc),
            "verify-all" => Ok(Task::VerifyAll),
            _ => match s.strip_prefix("verify:") {
                Some(id) => id
                    .parse()
                    .map(Task::Verify)
                    .map_err(|_| ConfigError::new("task", format!("unknown theorem id `{id}`"))),
                None => Err(ConfigError::new(
                    "task",
                    format!("`{s}` is not one of exact, series, mc, verify-all, verify:<id>"),
                )),
            },
        }
    }
}

impl TryFrom<String> for Task {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, ConfigError> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.to_string()
    }
}

/// A model given inline or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Preset(String),
    Spec(ModelSpec),
}

impl ModelEntry {
    pub fn spec(&self) -> Result<ModelSpec, ConfigError> {
        match self {
            ModelEntry::Spec(s) => Ok(s.clone()),
            ModelEntry::Preset(name) => presets::lookup(name)
                .ok_or_else(|| ConfigError::new("model", format!("unknown preset `{name}`"))),
        }
    }
}

/// Monte Carlo sub-task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    /// Horizon of the ladder-epoch simulation.
    pub horizon: u64,
    pub meander_n: u64,
    pub endpoint_n: u64,
    pub epsilon: f64,
    pub n_fixed: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            horizon: 256,
            meander_n: 64,
            endpoint_n: 128,
            epsilon: 0.05,
            n_fixed: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelEntry,
    pub task: Task,
    /// Series order or table depth `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of RNG streams; fixes the seed plan independently of workers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streams: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<usize>,
    /// Step at which conditioned local probabilities are checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_dev_n: Option<usize>,
    /// Output directory relative to the output root (defaults to `name`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub mc: McSettings,
}

pub const DEFAULT_ORDER: usize = 4096;
pub const DEFAULT_GRID: [u64; 5] = [250, 500, 1000, 2000, 4000];
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_STREAMS: u32 = 8;

impl ExperimentConfig {
    pub fn new(name: &str, model: ModelEntry, task: Task) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            model,
            task,
            n: None,
            n_grid: None,
            trials: None,
            seed: None,
            streams: None,
            workers: None,
            j_max: None,
            x_max: None,
            small_dev_n: None,
            output: None,
            mc: McSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| ConfigError::new(&field_of(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(Self::from_toml(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        self.model.spec()
    }

    pub fn build_model(&self) -> Result<IncrementModel, ConfigError> {
        self.model_spec()?
            .build()
            .map_err(|e| ConfigError::new("model", e.to_string()))
    }

    pub fn order(&self) -> usize {
        self.n.unwrap_or(DEFAULT_ORDER)
    }

    pub fn grid(&self) -> Vec<u64> {
        self.n_grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec())
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn streams(&self) -> u32 {
        self.streams.unwrap_or(DEFAULT_STREAMS)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    pub fn output_dir(&self) -> &str {
        self.output.as_deref().unwrap_or(&self.name)
    }

    /// Whether the task draws random numbers for this model.
    pub fn needs_seed(&self) -> Result<bool, ConfigError> {
        Ok(match self.task {
            Task::Mc => true,
            Task::Exact => false,
            _ => !self.build_model()?.is_lattice(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return Err(ConfigError::new(
                "name",
                "use letters, digits, `-`, `_` or `.`",
            ));
        }
        if let Some(out) = &self.output {
            let p = Path::new(out);
            if p.is_absolute()
                || p.components()
                    .any(|c| matches!(c, std::path::Component::ParentDir))
            {
                return Err(ConfigError::new(
                    "output",
                    "must be a relative path inside the output root",
                ));
            }
        }
        let model = self.build_model()?;
        if self.task == Task::Exact && !model.is_lattice() {
            return Err(ConfigError::new(
                "task",
                "exact tables need a lattice model",
            ));
        }
        if self.needs_seed()? && self.seed.is_none() {
            return Err(ConfigError::new(
                "seed",
                format!("required for the `{}` task on this model", self.task),
            ));
        }
        // TOML integers are signed 64-bit.
        if self.seed.is_some_and(|s| s > i64::MAX as u64)
            || self.trials.is_some_and(|t| t > i64::MAX as u64)
        {
            return Err(ConfigError::new(
                "seed",
                "seed and trials must not exceed 2^63 - 1",
            ));
        }
        if self.n == Some(0) {
            return Err(ConfigError::new("n", "must be positive"));
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid.contains(&0) {
                return Err(ConfigError::new(
                    "n_grid",
                    "must be a nonempty list of positive steps",
                ));
            }
            if !grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(ConfigError::new("n_grid", "must be strictly increasing"));
            }
        }
        if self.trials == Some(0) {
            return Err(ConfigError::new("trials", "must be positive"));
        }
        if self.streams == Some(0) {
            return Err(ConfigError::new("streams", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::new("workers", "must be positive"));
        }
        if !(self.mc.epsilon > 0.0 && self.mc.epsilon < 1.0) {
            return Err(ConfigError::new("mc.epsilon", "must lie in (0, 1)"));
        }
        if !(self.mc.n_fixed > 0.0) {
            return Err(ConfigError::new("mc.n_fixed", "must be positive"));
        }
        if self.mc.horizon == 0 || self.mc.meander_n == 0 || self.mc.endpoint_n < 2 {
            return Err(ConfigError::new(
                "mc",
                "horizon and meander_n must be positive, endpoint_n at least 2",
            ));
        }
        Ok(())
    }
}

fn field_of(e: &toml::de::Error) -> String {
    // toml reports "unknown field `x`" and "missing field `x`" in the message.
    let msg = e.message();
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub task: Option<Task>,
    pub output: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(n) = self.n {
            cfg.n = Some(n);
        }
        if let Some(t) = self.trials {
            cfg.trials = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(o) = &self.output {
            cfg.output = Some(o.clone());
        }
        cfg.validate()
    }
}
