//! Batch command-line surface: data synthesis, cohort audit, training,
//! ablations, and report aggregation.
//!
//! Every command is deterministic given `--seed`, writes a machine-readable
//! manifest of input/output content hashes, and reports errors as a single
//! machine-parsable line `error[<code>]: <message>` with a nonzero exit.

mod ablate;
mod analyze;
mod config;
mod manifest;
mod report;
mod synth;
mod train;

pub use config::{ExperimentConfig, ModelKind};
pub use manifest::Manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "fairtab", version, about = "Fair tabular learning pipeline")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by `train` and `ablate`; every flag overrides the matching
/// config-file field (flag > file > default).
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed for all random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model: meld | logistic | rf | gbdt | fair.
    #[arg(long)]
    pub model: Option<String>,
    /// Step-two fairness weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Step-one (distillation) fairness weight.
    #[arg(long, value_name = "ALPHA_KG")]
    pub alpha_kg: Option<f64>,
    /// Sensitive attribute to debias and report on.
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Cross-validation fold count.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Binarization threshold for DPD/EOD.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Parallel fold workers.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Freeze the dense path during end-to-end training.
    #[arg(long)]
    pub freeze_dense: bool,
    /// Skip numeric standardization before the neural paths.
    #[arg(long)]
    pub no_standardize: bool,
    /// Sigmoid-squash dense margins before the step-one fairness term.
    #[arg(long)]
    pub squash_step1: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic biased cohort plus its ground-truth bias manifest.
    Synth {
        /// SynthConfig JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit subgroup rates and score correlations from a counts file.
    Analyze {
        /// CSV with per-subgroup columns: group,score,n_w,n_r,n_f
        /// (`score` optional when --dataset supplies it).
        #[arg(long)]
        counts: PathBuf,
        /// Optional cohort CSV for per-subgroup mean scores.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Schema for --dataset.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated training of one model with a fairness report.
    Train(TrainFlags),
    /// The four-way ablation: full, w/o first-step, w/o second-step, undebiased.
    Ablate(TrainFlags),
    /// Aggregate run reports into comparison tables and plot data.
    Report {
        /// Directory containing run output directories.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, seed, out } => synth::cmd_synth(&config, seed, &out),
        Command::Analyze {
            counts,
            dataset,
            schema,
            out,
        } => analyze::cmd_analyze(&counts, dataset.as_deref(), schema.as_deref(), &out),
        Command::Train(flags) => train::cmd_train(&flags),
        Command::Ablate(flags) => ablate::cmd_ablate(&flags),
        Command::Report { runs, out } => report::cmd_report(&runs, &out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            1
        }
    }
}
