//! `stgraph`: synthesize datasets, preprocess, run cross-validated experiments,
//! count parameters and plot ROC curves.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "stgraph", version, about = "Spatio-temporal graph classification of node timeseries")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Floating-point type used for training.
    #[arg(long, global = true, value_enum)]
    pub precision: Option<PrecisionArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Window, scale and threshold a dataset; write the samples to disk.
    Preprocess(PreprocessArgs),
    /// Cross-validated experiment for one model.
    Run(RunArgs),
    /// Print the trainable parameter count of a model.
    Params(ParamsArgs),
    /// Render ROC CSV files into an SVG.
    RocPlot(RocPlotArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    pub subjects: usize,
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    #[arg(long, default_value_t = 4)]
    pub sessions: usize,
    /// Timesteps per session.
    #[arg(long, default_value_t = 160)]
    pub length: usize,
    /// Effect size in [0, 1]; 0 gives identically distributed classes.
    #[arg(long, default_value_t = 1.0)]
    pub effect: f64,
    /// covariance, spectral or both.
    #[arg(long, default_value = "covariance")]
    pub signal: String,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// Samples per subject (a multiple of the session count).
    #[arg(long)]
    pub splits: Option<usize>,
    /// Percentage of strongest edges kept.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model name (e.g. mean_CNN_GCN5, diff20_CNN, mean_TCN) or logreg / logreg_bin.
    #[arg(long)]
    pub model: Option<String>,
    /// Edge threshold in percent.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Samples per subject (4 for whole scans, 64 for 16 windows per scan with 4 scans).
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Single grid point (dropout 0, lr 1e-3, weight decay 0, 30 epochs, batch 16).
    #[arg(long)]
    pub grid_fast: bool,
    /// Comma-separated dropout values.
    #[arg(long)]
    pub dropout: Option<String>,
    /// Comma-separated learning rates.
    #[arg(long)]
    pub lr: Option<String>,
    /// Comma-separated weight decays.
    #[arg(long)]
    pub wd: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Keep last-epoch weights instead of the best-validation epoch.
    #[arg(long)]
    pub select_final_epoch: bool,
    /// Shuffle labels across subjects (null experiment).
    #[arg(long)]
    pub permute_labels: bool,
    /// Omit wall-clock time and timestamp from the results document.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Write a checkpoint of each fold's selected model.
    #[arg(long)]
    pub save_models: bool,
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    #[arg(long)]
    pub model: String,
    /// Timesteps per sample.
    #[arg(long, default_value_t = 1200)]
    pub length: usize,
    #[arg(long, default_value_t = 50)]
    pub nodes: usize,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RocPlotArgs {
    /// ROC CSV files, or directories searched for `roc_fold*.csv`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .downcast_ref::<stgraph_core::Error>()
                .map_or("cli", stgraph_core::Error::kind);
            let doc = serde_json::json!({
                "error": {
                    "kind": kind,
                    "message": format!("{err:#}"),
                }
            });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}
