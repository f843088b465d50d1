mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asl_core::{AslError, ErrorKind};
use config::RunConfig;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_INPUT: u8 = 5;

/// Weakly supervised temporal action localization with action selection
/// learning.
///
/// Settings come from built-in defaults, then --config FILE (key = value
/// lines), then --set KEY=VALUE pairs, then the dedicated flags of each
/// command. Run `asl keys` for the full key list.
///
/// Exit status: 0 success, 2 configuration, 3 file I/O, 4 numeric failure
/// (divergence, gradient check), 5 invalid input data.
#[derive(Parser)]
#[command(name = "asl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Seed for data generation, initialization and batching.
    #[arg(long)]
    seed: Option<u64>,
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test corpus.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train F and G; writes model.ckpt and epochs.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// joint, f-then-g or alternate:N:M.
        #[arg(long)]
        schedule: Option<String>,
        /// gce or bce.
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Turn a checkpoint's selection scores into proposals.csv.
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// asl, asl-s or asl-a.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Score proposals against ground truth; writes ap.csv and summary.txt.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        proposals: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// thumos or anet.
        #[arg(long)]
        grid: Option<String>,
        /// Adds Recall@N of the checkpoint's actionness to the report.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Selection diagnostics, Recall@N and the optional class-rate sweep.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset with ground truth to diagnose on.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Epoch log written by `train`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Earlier checkpoint for the consecutive T_pos IoU.
        #[arg(long)]
        previous: Option<PathBuf>,
        /// Retrain with T_pos capped at each sweep rate (needs --train-manifest).
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        train_manifest: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on random problems.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 25)]
        seeds: usize,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// List configuration keys and their defaults.
    Keys,
}

#[derive(Debug)]
pub enum CliError {
    Core(AslError),
    GradcheckFailed { max_error: f64, tolerance: f64 },
}

impl From<AslError> for CliError {
    fn from(e: AslError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Numeric => EXIT_NUMERIC,
                ErrorKind::Input => EXIT_INPUT,
            },
            CliError::GradcheckFailed { .. } => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::GradcheckFailed { max_error, tolerance } => {
                write!(
                    f,
                    "gradient check failed: max relative error {max_error:e} >= {tolerance:e}"
                )
            }
        }
    }
}

fn build_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<RunConfig, AslError> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    for pair in &common.set {
        config.apply_pair(pair)?;
    }
    let shared = [
        ("seed", common.seed.map(|s| s.to_string())),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in shared.iter().chain(flags) {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    config.finish()
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common } => commands::synth(&build_config(&common, &[])?)?,
        Command::Train {
            common,
            manifest,
            epochs,
            schedule,
            loss,
            lr,
        } => {
            let flags = [
                ("train_manifest", path_flag(&manifest)),
                ("epochs", epochs.map(|e| e.to_string())),
                ("schedule", schedule),
                ("loss", loss),
                ("lr", lr.map(|l| l.to_string())),
            ];
            commands::train(&build_config(&common, &flags)?)?
        }
        Command::Localize {
            common,
            checkpoint,
            manifest,
            mode,
        } => {
            let flags = [
                ("checkpoint", path_flag(&checkpoint)),
                ("manifest", path_flag(&manifest)),
                ("mode", mode),
            ];
            commands::localize(&build_config(&common, &flags)?)?
        }
        Command::Eval {
            common,
            proposals,
            manifest,
            grid,
            checkpoint,
        } => {
            let flags = [
                ("proposals", path_flag(&proposals)),
                ("manifest", path_flag(&manifest)),
                ("grid", grid),
                ("checkpoint", path_flag(&checkpoint)),
            ];
            commands::eval(&build_config(&common, &flags)?)?
        }
        Command::Diagnose {
            common,
            checkpoint,
            manifest,
            log,
            previous,
            sweep,
            train_manifest,
        } => {
            let flags = [
                ("checkpoint", path_flag(&checkpoint)),
                ("manifest", path_flag(&manifest)),
                ("log", path_flag(&log)),
                ("previous_checkpoint", path_flag(&previous)),
                ("train_manifest", path_flag(&train_manifest)),
            ];
            commands::diagnose(&build_config(&common, &flags)?, sweep)?
        }
        Command::Gradcheck {
            common,
            seeds,
            inject_sign_flip,
        } => commands::gradcheck(&build_config(&common, &[])?, seeds, inject_sign_flip)?,
        Command::Keys => {
            for (key, default) in config::KEYS {
                println!("{key:<24}{default}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
