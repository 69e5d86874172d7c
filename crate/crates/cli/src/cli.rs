use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::commands;
use crate::config::{parse_override, resolve, resolve_with, DistillRun, EesRun, EvalRun, IngestRun, ProfileRun, SynthRun, TeacherRun};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "patchecho", version, about = "Patch echo-state classifiers distilled from mixer teachers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Command-line values override the
/// config file; `--set` entries are applied last.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.alpha=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic sinusoid dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Window a labelled CSV recording into a dataset directory.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the mixer teacher.
    TrainTeacher {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Distill a student from a trained teacher.
    Distill {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
    },
    /// Report FLOPs, heap and footprint for a checkpoint or architecture.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Rank models by accuracy per unit of resource use.
    EesReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Comma-separated preset names.
        #[arg(long, value_delimiter = ',')]
        preset: Vec<String>,
        /// `alpha,beta,gamma`; replaces the presets.
        #[arg(long)]
        weights: Option<String>,
    },
}

fn path(p: &Option<PathBuf>) -> Option<Value> {
    p.as_ref().map(|p| Value::String(p.display().to_string()))
}

/// Turn flags into config overrides: named flags first, `--set` last.
fn overrides(common: &Common, named: Vec<(&str, Option<Value>)>) -> Result<Vec<(String, Value)>, CliError> {
    let mut out: Vec<(String, Value)> = Vec::new();
    if let Some(dir) = path(&common.out_dir) {
        out.push(("out_dir".into(), dir));
    }
    if let Some(seed) = common.seed {
        out.push(("seed".into(), Value::from(seed)));
    }
    out.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for s in &common.set {
        out.push(parse_override(s)?);
    }
    Ok(out)
}

fn load<T: DeserializeOwned>(common: &Common, named: Vec<(&str, Option<Value>)>) -> Result<T, CliError> {
    resolve(common.config.as_deref(), &overrides(common, named)?)
}

/// Load with a default model `kind` under `key`, so partial model
/// overrides work without naming the kind.
fn load_model<T: DeserializeOwned>(
    common: &Common,
    key: &str,
    kind: &str,
    named: Vec<(&str, Option<Value>)>,
) -> Result<T, CliError> {
    let base = serde_json::json!({ key: { "kind": kind } });
    resolve_with(base, common.config.as_deref(), &overrides(common, named)?)
}

/// Print to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Other(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    emit(&serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?)
}

fn parse_weights(s: &str) -> Result<Value, CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("--weights '{s}': {e}")))?;
    match parts[..] {
        [alpha, beta, gamma] => Ok(serde_json::json!({"alpha": alpha, "beta": beta, "gamma": gamma})),
        _ => Err(CliError::Config(format!("--weights needs three values, got '{s}'"))),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common } => {
            let cfg: SynthRun = load(&common, vec![])?;
            commands::record_config(&cfg.out_dir, &cfg)?;
            print_json(&commands::synth(&cfg)?)
        }
        Command::Ingest { common, input } => {
            let cfg: IngestRun = load(&common, vec![("input", path(&input))])?;
            commands::record_config(&cfg.out_dir, &cfg)?;
            print_json(&commands::ingest(&cfg)?)
        }
        Command::TrainTeacher { common, data } => {
            let mut cfg: TeacherRun = load_model(&common, "model", "teacher", vec![("data", path(&data))])?;
            if common.seed.is_some() {
                cfg.train.seed = cfg.seed;
            }
            cfg.train.validate()?;
            let digest = commands::record_config(&cfg.out_dir, &cfg)?;
            print_json(&commands::train_teacher_cmd(&cfg, digest)?)
        }
        Command::Distill { common, data, teacher } => {
            let mut cfg: DistillRun = load_model(&common, "student", "echo", vec![("data", path(&data)), ("teacher", path(&teacher))])?;
            if common.seed.is_some() {
                cfg.train.seed = cfg.seed;
            }
            cfg.train.validate()?;
            let digest = commands::record_config(&cfg.out_dir, &cfg)?;
            print_json(&commands::distill_cmd(&cfg, digest)?)
        }
        Command::Eval { common, data, checkpoint, split } => {
            let cfg: EvalRun = load(
                &common,
                vec![
                    ("data", path(&data)),
                    ("checkpoint", path(&checkpoint)),
                    ("split", split.map(Value::String)),
                ],
            )?;
            if let Some(dir) = &cfg.out_dir {
                commands::record_config(dir, &cfg)?;
            }
            print_json(&commands::eval_cmd(&cfg)?)
        }
        Command::Profile { common, checkpoint } => {
            // profile writes a single file, so --out-dir names its directory
            let mut cfg: ProfileRun = {
                let plain = Common { out_dir: None, ..common.clone() };
                load(&plain, vec![("checkpoint", path(&checkpoint))])?
            };
            if let Some(dir) = &common.out_dir {
                commands::record_config(dir, &cfg)?;
                cfg.out.get_or_insert_with(|| dir.join("metrics.json"));
            }
            print_json(&commands::profile_cmd(&cfg)?)
        }
        Command::EesReport { common, metrics, preset, weights } => {
            let presets = (!preset.is_empty()).then(|| Value::from(preset));
            let weights = weights.as_deref().map(parse_weights).transpose()?;
            let cfg: EesRun = load(
                &common,
                vec![("metrics", path(&metrics)), ("presets", presets), ("weights", weights)],
            )?;
            if let Some(dir) = &cfg.out_dir {
                commands::record_config(dir, &cfg)?;
            }
            for r in commands::ees_report_cmd(&cfg)? {
                emit(&r.to_table())?;
            }
            Ok(())
        }
    }
}

