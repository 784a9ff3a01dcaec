//! Command-line pipeline around `nilm_core`: synthetic data, thresholding
//! reports, training, evaluation and loss-weight sweeps.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nilm_core::Error;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "nilm",
    version,
    about = "Appliance ON/OFF thresholding and disaggregation pipeline"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Top-level seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Extra `key=value` setting; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic household CSV with ground-truth status.
    Synth,
    /// Derive MP/VS/AT thresholds and reconstruction reports.
    Threshold,
    /// Train one model per appliance, method and loss weight.
    Train,
    /// Score trained models on the test split.
    Evaluate {
        /// Directory holding checkpoints (default: the output directory).
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Train and score across loss weights and repetitions.
    Sweep,
}

impl Cli {
    pub fn config(&self) -> nilm_core::Result<RunConfig> {
        let mut overrides = Vec::new();
        if let Some(o) = &self.common.out {
            overrides.push(format!("out={}", o.display()));
        }
        if let Some(s) = self.common.seed {
            overrides.push(format!("seed={s}"));
        }
        overrides.extend(self.common.set.iter().cloned());
        RunConfig::load(self.common.config.as_deref(), &overrides)
    }
}

/// Process exit code for an error: 2 configuration, 3 input data, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Numerical { .. } => 4,
        Error::Input(_)
        | Error::Row { .. }
        | Error::DegenerateClusters(_)
        | Error::UndefinedMetric(_)
        | Error::Io(_)
        | Error::Csv(_) => 3,
    }
}

pub fn run(cli: &Cli) -> nilm_core::Result<Vec<PathBuf>> {
    let cfg = cli.config()?;
    match &cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Threshold => commands::threshold(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Evaluate { checkpoint_dir } => commands::evaluate(&cfg, checkpoint_dir.as_deref()),
        Command::Sweep => commands::sweep(&cfg),
    }
}
