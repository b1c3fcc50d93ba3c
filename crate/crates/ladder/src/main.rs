use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use ladder::config::{ExperimentConfig, Overrides, Task};
use ladder::manifest::{RunManifest, MANIFEST_FILE};
use ladder::presets::PRESETS;
use ladder_core::asymptotics::TheoremId;

#[derive(Parser)]
#[command(
    name = "ladder",
    version,
    about = "Ladder-epoch computations and asymptotic checks for random walks"
)]
struct Cli {
    /// Directory that receives run outputs.
    #[arg(
        long,
        global = true,
        env = "LADDER_OUTPUT_ROOT",
        default_value = "ladder-output"
    )]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in a config file.
    Run {
        /// Experiment config (TOML).
        #[arg(required_unless_present = "from_manifest")]
        config: Option<PathBuf>,
        /// Rerun the config recorded in a manifest (file or run directory).
        #[arg(long, conflicts_with = "config")]
        from_manifest: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Task, overriding the config (exact, series, mc, verify-all, verify:<id>).
        #[arg(long)]
        task: Option<Task>,
    },
    /// Check limit laws for the config's model.
    Verify {
        config: PathBuf,
        /// Theorem id to check; repeatable. All when omitted.
        #[arg(long = "theorem")]
        theorems: Vec<TheoremId>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Print the built-in model presets.
    ListModels {
        /// Print each preset as a TOML model table.
        #[arg(long)]
        toml: bool,
    },
    /// Summarize a run manifest.
    ShowManifest {
        /// Manifest file or run directory.
        path: PathBuf,
        /// Recompute artifact digests and report mismatches.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args, Default)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Series order / table depth.
    #[arg(short = 'n', long = "order")]
    n: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory relative to the output root.
    #[arg(long)]
    output: Option<String>,
}

impl OverrideArgs {
    fn into_overrides(self, task: Option<Task>) -> Overrides {
        Overrides {
            n: self.n,
            trials: self.trials,
            seed: self.seed,
            workers: self.workers,
            task,
            output: self.output,
        }
    }
}

fn execute(root: &Path, mut cfg: ExperimentConfig, overrides: Overrides) -> anyhow::Result<bool> {
    overrides.apply(&mut cfg)?;
    let outcome = ladder::run(&cfg, root)?;
    for (id, v) in &outcome.manifest.verdicts {
        println!("{id:<12} {v:?}");
    }
    println!("wrote {}", outcome.dir.display());
    Ok(outcome.all_passed())
}

fn main_inner(cli: Cli) -> anyhow::Result<bool> {
    let root = cli.output_root;
    match cli.command {
        Command::Run {
            config,
            from_manifest,
            overrides,
            task,
        } => {
            let cfg = match (config, from_manifest) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(m)) => RunManifest::load(&m)?.config,
                (None, None) => bail!("give a config file or --from-manifest"),
            };
            execute(&root, cfg, overrides.into_overrides(task))
        }
        Command::Verify {
            config,
            theorems,
            overrides,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if theorems.len() <= 1 {
                let task = theorems
                    .first()
                    .map_or(Task::VerifyAll, |t| Task::Verify(*t));
                return execute(&root, cfg, overrides.into_overrides(Some(task)));
            }
            let mut ok = true;
            let base = overrides
                .output
                .clone()
                .unwrap_or_else(|| cfg.output_dir().to_string());
            for t in theorems {
                let mut o = overrides_clone(&overrides);
                o.task = Some(Task::Verify(t));
                o.output = Some(format!("{base}/{t}"));
                ok &= execute(&root, cfg.clone(), o)?;
            }
            Ok(ok)
        }
        Command::ListModels { toml } => {
            for p in PRESETS {
                if toml {
                    println!(
                        "# {}: {}\n[model]\n{}",
                        p.name,
                        p.about,
                        toml::to_string(&(p.spec)())?
                    );
                } else {
                    println!("{:<20} {}", p.name, p.about);
                }
            }
            Ok(true)
        }
        Command::ShowManifest { path, check } => {
            let manifest = RunManifest::load(&path)?;
            print!("{}", manifest.summary());
            if check {
                let dir = if path.is_dir() {
                    path.clone()
                } else {
                    path.parent().map(Path::to_path_buf).unwrap_or_default()
                };
                let bad = manifest.check_outputs(&dir);
                for (rel, why) in &bad {
                    println!("MISMATCH {rel}: {why}");
                }
                if !bad.is_empty() {
                    bail!("{} artifact(s) differ from {MANIFEST_FILE}", bad.len());
                }
                println!("all {} artifacts match", manifest.outputs.len());
            }
            Ok(manifest.all_passed())
        }
    }
}

fn overrides_clone(o: &OverrideArgs) -> Overrides {
    Overrides {
        n: o.n,
        trials: o.trials,
        seed: o.seed,
        workers: o.workers,
        task: None,
        output: o.output.clone(),
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
