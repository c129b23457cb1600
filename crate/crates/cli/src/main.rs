//! `decayrnn`: experiments with missingness-aware recurrent classifiers.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decayrnn_core::cells::CellKind;
use decayrnn_core::Error;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "decayrnn", version, about = "Missingness-aware GRU classifiers for irregular multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with informative missingness.
    Generate(GenerateArgs),
    /// Resample irregular readings into regular bins.
    Ingest(IngestArgs),
    /// Summarize a dataset.
    Stats(DataArgs),
    /// Train one model with early stopping on a held-out validation split.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Stratified k-fold cross validation.
    Cv(CvArgs),
    /// AUC of predictions made from prefixes of each series.
    OnlineEval(OnlineArgs),
    /// Cross validation on label-stratified subsamples of several sizes.
    Scaling(ScalingArgs),
    /// Tabulate the learned decay of a saved model.
    DecayReport(DecayArgs),
    /// Correlation between per-series missing rates and labels.
    Correlate(DataArgs),
    /// Parameter count for a cell kind, or the hidden size fitting a budget.
    ParamCount(ParamCountArgs),
    /// Compare analytic gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Run the synthetic correlation benchmark.
    Suite(SuiteArgs),
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// Measurements CSV: series_id,timestamp,<variables...>
    #[arg(long)]
    data: PathBuf,
    /// Labels CSV: series_id,<tasks...> or series_id,class
    #[arg(long)]
    labels: PathBuf,
    /// Class count for multiclass labels (default: inferred).
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ModelSize {
    #[arg(long, conflicts_with = "param_budget")]
    hidden: Option<usize>,
    /// Largest hidden size whose parameter count fits this budget.
    #[arg(long)]
    param_budget: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 18)]
    vars: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 378)]
    samples: usize,
    #[arg(long, default_value_t = 24)]
    steps: usize,
    /// Binary data where only the masking carries the label; the value is the
    /// gap between the two classes' missing probabilities.
    #[arg(long)]
    mask_signal: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    bin_hours: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    kind: CellKind,
    #[command(flatten)]
    size: ModelSize,
    /// Overrides the seed of the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// Training configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CvArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Debug, Args, Serialize)]
struct OnlineArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Hours at which series are truncated.
    #[arg(long, value_delimiter = ',', required = true)]
    cutoffs: Vec<f64>,
    /// Score this model on every series instead of cross validating.
    #[arg(long, conflicts_with = "kind")]
    model: Option<PathBuf>,
    #[arg(long, required_unless_present = "model")]
    kind: Option<CellKind>,
    #[command(flatten)]
    size: ModelSize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Debug, Args, Serialize)]
struct ScalingArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated cell kinds.
    #[arg(long, value_delimiter = ',', required = true)]
    kind: Vec<CellKind>,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Debug, Args, Serialize)]
struct DecayArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ParamCountArgs {
    #[arg(long)]
    kind: CellKind,
    #[arg(long)]
    vars: usize,
    #[command(flatten)]
    size: ModelSize,
    #[arg(long, default_value_t = 1)]
    outputs: usize,
}

#[derive(Debug, Args, Serialize)]
struct GradCheckArgs {
    #[arg(long)]
    kind: CellKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    vars: usize,
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    steps: usize,
}

#[derive(Debug, Args, Serialize)]
struct SuiteArgs {
    /// Suite configuration (JSON); defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "suite")]
    out_dir: PathBuf,
}

/// Exit codes: 0 success, 1 usage or configuration, 2 data or I/O,
/// 3 numerical abort.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Config(_) => 1,
        Error::Data(_) | Error::Io { .. } | Error::Serde(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
