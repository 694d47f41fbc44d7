//! `dsurv` — train, evaluate, and benchmark discrete-time survival models
//! on delimited datasets.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dsurv", version, about = "Discrete-time survival modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survival dataset.
    Simulate(SimulateArgs),
    /// Fit a survival network and write the model file.
    Train(TrainArgs),
    /// Score a model: concordance index, Brier scores, calibration tables.
    Evaluate(EvaluateArgs),
    /// Write per-subject survival curves, one column per interval boundary.
    Predict(PredictArgs),
    /// Write a calibration table at one follow-up time.
    Calibrate(CalibrateArgs),
    /// Time training over bootstrap-resampled dataset sizes.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Total number of subjects.
    #[arg(long)]
    subjects: usize,
    /// Group spec `FRACTION:exponential:MEDIAN` or
    /// `FRACTION:weibull:SCALE:SHAPE`; repeat per group.
    #[arg(long = "group", required = true)]
    groups: Vec<String>,
    /// Exponential censoring half-life in days; omit for no censoring.
    #[arg(long)]
    censor_halflife: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Interval scheme: uniform | halflife | explicit.
    #[arg(long, default_value = "halflife")]
    grid_scheme: String,
    /// Uniform scheme: interval width in days.
    #[arg(long)]
    width: Option<f64>,
    /// Last follow-up time to cover, in days.
    #[arg(long)]
    horizon: Option<f64>,
    /// Half-life scheme: number of intervals.
    #[arg(long)]
    intervals: Option<usize>,
    /// Half-life scheme: the half-life in days (alternative to --horizon).
    #[arg(long)]
    halflife: Option<f64>,
    /// Explicit scheme: comma-separated boundary days.
    #[arg(long)]
    boundaries: Option<String>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Output head: flexible | prophaz.
    #[arg(long, default_value = "flexible")]
    head: String,
    /// Comma-separated hidden layer widths (empty for none).
    #[arg(long, default_value = "")]
    hidden: String,
}

#[derive(Args, Clone)]
struct FitArgs {
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    rmsprop_decay: f64,
    #[arg(long, default_value_t = 1e-8)]
    rmsprop_epsilon: f64,
    /// Fixed L2 strength; ignored when --l2-candidates is given.
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Comma-separated L2 strengths to cross-validate.
    #[arg(long)]
    l2_candidates: Option<String>,
    /// Folds for L2 cross-validation.
    #[arg(long, default_value_t = 10)]
    cv_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON; defaults to columns named `time` and `event` with
    /// median-imputed features.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Where to write the model file.
    #[arg(long)]
    model_out: PathBuf,
    /// Optional per-epoch loss trace CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Evaluation times in days for the Brier score.
    #[arg(long, default_value = "182,365,1095")]
    times: String,
    /// Subjects are ranked by 1 - S(this horizon) for the C-index.
    #[arg(long, default_value_t = 365.0)]
    rank_horizon: f64,
    /// Write calibration tables (one block per evaluation time) here.
    #[arg(long)]
    calibration_out: Option<PathBuf>,
    /// Write the metric summary as delimited text here.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Calibration quantile groups.
    #[arg(long, default_value_t = 10)]
    groups: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV of cumulative survival, one column per boundary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Follow-up time in days.
    #[arg(long)]
    time: f64,
    #[arg(long, default_value_t = 10)]
    groups: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Source dataset to bootstrap-resample from.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Largest resampled size; sizes run 10^3, 10^3.5, ... up to this.
    #[arg(long, default_value_t = 100_000)]
    max_size: usize,
    /// Repetitions per size, averaged.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Optional CSV of (size, mean seconds).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// CLI-level failure, carrying the exit code policy.
enum CliError {
    Usage(String),
    Lib(dsurv::Error),
}

impl From<dsurv::Error> for CliError {
    fn from(e: dsurv::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        use dsurv::Error::*;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(err) => match err {
                InvalidArgument(_) => 2,
                Io(_) | Csv(_) | Ingest { .. } | Schema(_) | ModelParse(_) | ModelVersion { .. }
                | ShapeMismatch(_) => 3,
                TrainingDiverged { .. } | OutOfHorizon { .. } | DegenerateCovariate(_)
                | Separation { .. } | InvalidState(_) | UndefinedMetric(_) => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Lib(err) => write!(f, "{err}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Predict(args) => commands::predict(args),
        Command::Calibrate(args) => commands::calibrate(args),
        Command::Benchmark(args) => commands::benchmark(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
