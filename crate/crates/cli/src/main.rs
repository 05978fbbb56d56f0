//! Command-line frontend: ingestion, estimation, validation, model testing,
//! simulation and diagnostic-curve emission as reproducible runs.
//!
//! Every subcommand writes its outputs plus a `manifest.txt` echoing the
//! fully resolved configuration; `--from-manifest` replays one.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod manifest;
mod ops;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Core(binshrink::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "{msg}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<binshrink::Error> for RunError {
    fn from(e: binshrink::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(binshrink::Error::Parse { .. }) => 3,
            RunError::Core(binshrink::Error::Domain(_)) => 3,
            RunError::Core(binshrink::Error::Numeric(_)) => 4,
            RunError::Io(_) => 3,
        }
    }
}

/// Environment variable holding the default data path.
pub const DATA_ENV: &str = "BINSHRINK_DATA";

#[derive(Parser, Debug)]
#[command(
    name = "binshrink",
    version,
    about = "Shrinkage prediction of latent binomial success rates from split-period count data"
)]
struct Cli {
    /// Replay a previously emitted manifest instead of giving a subcommand.
    #[arg(long, value_name = "FILE")]
    from_manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit exact bias/variance diagnostic curves for the arcsine transform.
    Curves(CurvesArgs),
    /// Fit estimators on the estimation period and write their predictions.
    Fit(FitArgs),
    /// Fit estimators and score them against the holdout period.
    Validate(ValidateArgs),
    /// Naive-vs-mean break-even statistics per cohort.
    Breakeven(BreakevenArgs),
    /// Constant-rate binomial goodness-of-fit tests with FDR output.
    Gof(GofArgs),
    /// Ten-day-segment streakiness scan (needs segment-level data).
    Scan(ScanArgs),
    /// Synthetic-data benchmark of estimators and criteria.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV; defaults to $BINSHRINK_DATA.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Period grouping: months, halves, five-one, month-one, ten-day.
    #[arg(long, default_value = "halves")]
    scheme: String,
    /// Cohort: all, nonpitchers, pitchers.
    #[arg(long, default_value = "all")]
    cohort: String,
    /// Minimum estimation-period attempts.
    #[arg(long, default_value_t = 11)]
    min_ab_train: u32,
    /// Minimum validation-period attempts.
    #[arg(long, default_value_t = 11)]
    min_ab_test: u32,
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    /// Comma list of estimator tags, or "all".
    #[arg(long, default_value = "all")]
    estimators: String,
    /// Arcsine transform offset.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    /// Kernel bandwidth for the nonparametric rule (default by sample size).
    #[arg(long)]
    h: Option<f64>,
    /// Quadrature nodes on the center axis.
    #[arg(long, default_value_t = 64)]
    mu_nodes: usize,
    /// Quadrature nodes on the variance axis.
    #[arg(long, default_value_t = 64)]
    omega_nodes: usize,
    /// Solver tolerance for the hyperparameter fits.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap for the hyperparameter fits.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    /// Comma list of transform offsets.
    #[arg(long, default_value = "0,0.25,0.375")]
    c: String,
    /// Comma list of attempt counts.
    #[arg(long, default_value = "12")]
    n: String,
    /// Success rates as comma list, or "grid" for 0.01..0.99 step 0.01.
    #[arg(long, default_value = "grid")]
    p: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Comma list of criteria (tse-star, tse-r-star, twse-star) or "all".
    #[arg(long, default_value = "all")]
    criteria: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct BreakevenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Period grouping for the split.
    #[arg(long, default_value = "halves")]
    scheme: String,
    /// Comma list of cohorts to report.
    #[arg(long, default_value = "all,nonpitchers,pitchers")]
    cohorts: String,
    #[arg(long, default_value_t = 11)]
    min_ab_train: u32,
    #[arg(long, default_value_t = 11)]
    min_ab_test: u32,
    /// Arcsine transform offset.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    /// halves (two-period contrasts) or months (dispersion tests).
    #[arg(long, default_value = "months")]
    mode: String,
    /// Per-period attempt floor for inclusion.
    #[arg(long, default_value_t = 12)]
    min_ab: u32,
    /// False discovery rate for the step-up procedure.
    #[arg(long, default_value_t = 0.05)]
    q_star: f64,
    /// Arcsine transform offset.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Season attempt floor for candidacy.
    #[arg(long, default_value_t = 100)]
    min_season_ab: u32,
    /// Per-segment attempt floor for a qualifying segment.
    #[arg(long, default_value_t = 12)]
    min_ab: u32,
    /// False discovery rate for the step-up procedure.
    #[arg(long, default_value_t = 0.05)]
    q_star: f64,
    /// Arcsine transform offset.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Pull attempt arrays from a data file instead of the generator.
    #[arg(long)]
    attempts_data: Option<PathBuf>,
    /// Split scheme when --attempts-data is given.
    #[arg(long, default_value = "halves")]
    scheme: String,
    /// Cohort when --attempts-data is given.
    #[arg(long, default_value = "all")]
    cohort: String,
    /// Synthetic generator: player count.
    #[arg(long, default_value_t = 486)]
    players: usize,
    /// Synthetic generator: mean of log attempts.
    #[arg(long, default_value_t = 4.80)]
    log_mean: f64,
    /// Synthetic generator: sd of log attempts.
    #[arg(long, default_value_t = 0.72)]
    log_sd: f64,
    /// Synthetic generator: attempt floor.
    #[arg(long, default_value_t = 11)]
    min_n: u32,
    /// Synthetic generator: attempt cap.
    #[arg(long, default_value_t = 620)]
    max_n: u32,
    /// Synthetic generator: second-period collapse probability.
    #[arg(long, default_value_t = 0.105)]
    dropout: f64,
    /// Latent-mean model: normal, two-group, n-correlated.
    #[arg(long, default_value = "normal")]
    theta_model: String,
    /// Center of the latent means (normal model).
    #[arg(long, default_value_t = 0.544)]
    mu: f64,
    /// Variance of the latent means (normal model).
    #[arg(long, default_value_t = 0.0011)]
    tau2: f64,
    /// two-group parameters: weight1,mu1,tau2_1,mu2,tau2_2.
    #[arg(long, default_value = "0.14,0.40,0.0007,0.55,0.0008")]
    mix: String,
    /// n-correlated parameters: intercept,slope,residual_sd.
    #[arg(long, default_value = "0.40,0.028,0.028")]
    theta_ab: String,
    /// Noise model: gaussian or binomial.
    #[arg(long, default_value = "gaussian")]
    noise: String,
    /// Replications.
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Master seed; replications use derived streams.
    #[arg(long, default_value_t = 8)]
    seed: u64,
    /// Eligibility attempt floor inside the simulation.
    #[arg(long, default_value_t = 11)]
    min_ab: u32,
    /// Comma list of estimator tags, or "all".
    #[arg(long, default_value = "mean,js")]
    estimators: String,
    /// Comma list of criteria, or "all".
    #[arg(long, default_value = "tse-star")]
    criteria: String,
    /// Arcsine transform offset.
    #[arg(long, default_value_t = 0.25)]
    c: f64,
    #[command(flatten)]
    out: OutArgs,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match (cli.from_manifest, cli.command) {
        (Some(_), Some(_)) => Err(RunError::Config(
            "--from-manifest conflicts with giving a subcommand".into(),
        )),
        (Some(path), None) => replay(&path),
        (None, Some(command)) => dispatch(command),
        (None, None) => Err(RunError::Config(
            "a subcommand or --from-manifest is required (see --help)".into(),
        )),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn replay(path: &PathBuf) -> Result<(), RunError> {
    let text = std::fs::read_to_string(path)?;
    let argv = manifest::to_argv(&text)?;
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| RunError::Config(format!("manifest does not parse: {e}")))?;
    match cli.command {
        Some(command) => dispatch(command),
        None => Err(RunError::Config("manifest lacks a subcommand".into())),
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Curves(args) => ops::curves(args),
        Command::Fit(args) => ops::fit(args),
        Command::Validate(args) => ops::validate(args),
        Command::Breakeven(args) => ops::breakeven(args),
        Command::Gof(args) => ops::gof(args),
        Command::Scan(args) => ops::scan(args),
        Command::Simulate(args) => ops::simulate(args),
    }
}
