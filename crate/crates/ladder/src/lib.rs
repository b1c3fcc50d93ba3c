//! Batch experiment runner around `ladder-core`: experiment configs, task
//! dispatch, artifact formats and run manifests.

pub mod cache;
pub mod config;
pub mod io;
pub mod manifest;
pub mod presets;
pub mod runner;
pub mod tasks;

pub use config::{ExperimentConfig, ModelEntry, Overrides, Task};
pub use manifest::RunManifest;
pub use tasks::{run, RunOutcome};
