use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod render;

/// Zero-sum log-contrast quantile regression for compositional covariates.
#[derive(Debug, Parser)]
#[command(name = "coqr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a quantile model to a CSV file.
    Fit(FitArgs),
    /// Run one of the Monte Carlo studies.
    Simulate(SimulateArgs),
    /// Repeated hold-out NMSE comparison on a CSV file.
    Eval(EvalArgs),
    /// Write a synthetic compositional CSV with a known coefficient vector.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tune {
    Bic,
    Cv,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, default_value_t = 0.5, value_parser = parse_tau)]
    pub tau: f64,
    /// Fixed penalty level for the adaptive-LASSO fit.
    #[arg(long, conflicts_with = "tune")]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub tune: Option<Tune>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub n_lambdas: usize,
    /// Replace the response b by log(b / (100 − b)).
    #[arg(long)]
    pub logit: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: u8,
    #[arg(long, default_value = "normal")]
    pub dist: String,
    /// Sample sizes, comma separated. Example 1 defaults to 50,100,200,500.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Number of parts (Example 2 only).
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.5, value_parser = parse_tau)]
    pub tau: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.5, value_parser = parse_tau)]
    pub tau: f64,
    /// Evaluate the closed, log-transformed, zero-sum arm.
    #[arg(long)]
    pub compositional: bool,
    /// Evaluate raw covariates without the constraint.
    #[arg(long)]
    pub original: bool,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub n_lambdas: usize,
    #[arg(long)]
    pub logit: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Response is an exact log-contrast.
    Noiseless,
    /// Log-contrast plus draws from `--dist`.
    Noisy,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "noisy")]
    pub kind: SynthKind,
    #[arg(long, default_value = "t3")]
    pub dist: String,
    #[arg(long, default_value_t = 250)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let tau: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if tau > 0.0 && tau < 1.0 {
        Ok(tau)
    } else {
        Err(format!("τ must lie strictly between 0 and 1, got {tau}"))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(coqr::Error),
}

impl From<coqr::Error> for CliError {
    fn from(e: coqr::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("COQR_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "COQR_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
