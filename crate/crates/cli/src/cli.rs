use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Source-data selection for covariance-based BCI transfer learning.
#[derive(Debug, Parser)]
#[command(name = "srcsel", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set rpa.rotation_tol=1e-6`. The value
    /// is read as JSON, or as a string when it is not valid JSON. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Use this seed for every stage (synthesis, folds, rotation restarts,
    /// training and the Random method).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to the number of available cores. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic covset from the `synth` section of the config.
    Synth {
        /// Output covset (`.gz` for a compressed file).
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-subject means, dispersions and intra-subject accuracy.
    Stats {
        #[arg(long)]
        data: PathBuf,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        /// Drop subjects whose intra-subject accuracy is below this value.
        #[arg(long)]
        filter_intra: Option<f64>,
    },
    /// Pairwise transfer-accuracy matrix (CSV and JSON).
    Matrix {
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        filter_intra: Option<f64>,
    },
    /// Pair features of every ordered pair of subjects with their transfer accuracy.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Reuse an accuracy matrix JSON instead of recomputing it.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        filter_intra: Option<f64>,
    },
    /// Train one predictor per leave-groups-out subject fold.
    TrainPredictor {
        /// Feature CSV with an accuracy column.
        #[arg(long)]
        features: PathBuf,
        /// Number of subject folds (defaults to `subject_folds` of the config).
        #[arg(long)]
        folds: Option<usize>,
        /// Output directory for `folds.json` and `fold_XX.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the selection methods and compare them pairwise.
    Compare {
        #[command(flatten)]
        bench: BenchArgs,
        /// Candidates per method (defaults to `candidates` of the config).
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Gap to Oracle of every method over a range of candidate counts.
    Sweep {
        #[command(flatten)]
        bench: BenchArgs,
        /// Candidate counts: `1..10` (inclusive) or `3,6,9`.
        #[arg(long)]
        candidates: Option<String>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory written by `train-predictor`.
    #[arg(long)]
    pub models: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse an accuracy matrix JSON instead of recomputing it.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Reuse a feature CSV instead of recomputing the features.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub filter_intra: Option<f64>,
}
