//! `matgrid` command-line front end.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "matgrid", version, about = "Aliased Matérn spectra, grid operators and SPDE comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// True aliased and SPDE spectra and their reciprocals along a frequency sweep.
    Spectrum(SpectrumArgs),
    /// Normalized inverse-operator coefficients as a function of nu.
    InverseOp(InverseOpArgs),
    /// Coefficients of the SPDE precision stencil.
    Stencil(StencilArgs),
    /// SPDE to true spectrum ratio at every DFT frequency of a grid.
    RatioGrid(RatioGridArgs),
    /// Lattice constants and small-scale expansions as JSON lines.
    VerifyTheorems(VerifyArgs),
    /// Simulate one Matérn field on a grid.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of a field written by `simulate`.
    Fit(FitArgs),
    /// Parameter-bias simulation study.
    SimStudy(SimStudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum OpMethod {
    /// Infinite-grid operator from the aliased spectrum.
    Operator,
    /// Row of the inverse dense covariance on a finite grid.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum SimMethodArg {
    Cholesky,
    Convolution,
}

#[derive(Debug, Args, serde::Serialize)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1.5)]
    nu: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Number of frequencies from 0 to the Nyquist frequency (along the first axis).
    #[arg(long, default_value_t = 201)]
    n_freq: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct InverseOpArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Comma-separated smoothness values; overrides --nu-range.
    #[arg(long, value_delimiter = ',')]
    nu: Vec<f64>,
    /// Smoothness sweep as lo:hi:step.
    #[arg(long, default_value = "0.25:2.5:0.05")]
    nu_range: String,
    /// Comma-separated inverse ranges.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Offsets as a comma list: `1,2,3` in 1D, `1:0,1:2` in 2D.
    #[arg(long)]
    offsets: Option<String>,
    #[arg(long, value_enum, default_value_t = OpMethod::Operator)]
    method: OpMethod,
    /// Grid size N or NxM; defaults to 65536 / 512x512 (operator) or 41 / 21x21 (matrix).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct StencilArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct RatioGridArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Even grid size N or NxM.
    #[arg(long, default_value = "64x64")]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct VerifyArgs {
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Three alpha*delta values instead of the full sweep.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct SimulateArgs {
    #[arg(long, default_value = "20x20")]
    grid: String,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma2: f64,
    /// Nugget variance as a fraction of sigma2.
    #[arg(long, default_value_t = 0.0)]
    tau2: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicate index selecting the random stream.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    #[arg(long, value_enum, default_value_t = SimMethodArg::Cholesky)]
    method: SimMethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct FitArgs {
    /// CSV with a `value` column in grid order, as written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "20x20")]
    grid: String,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value = "true_matern")]
    model: String,
    /// Fixed nugget ratio, or the starting value with --estimate-tau2.
    #[arg(long, default_value_t = 0.0)]
    tau2: f64,
    #[arg(long)]
    estimate_tau2: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
struct SimStudyArgs {
    #[arg(long, default_value = "20x20")]
    grid: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated nugget ratios.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1")]
    tau2: Vec<f64>,
    /// Comma-separated models.
    #[arg(long, value_delimiter = ',', default_value = "true_matern,spde,spde_double")]
    model: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Periodic embedding size NxM for the SPDE models.
    #[arg(long)]
    embed: Option<String>,
    /// 30x30 grid, 500 replicates and nugget ratios 0, 0.01, 0.1.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory.
    #[arg(long, default_value = "sim_study")]
    out: PathBuf,
}

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<matgrid::Error> for CliError {
    fn from(e: matgrid::Error) -> Self {
        use matgrid::Error::*;
        match e {
            Domain(_) | InvalidGrid(_) | UnsupportedCase(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Numerical(format!("CSV: {e}"))
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MATGRID_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MATGRID_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::InverseOp(a) => commands::inverse_op(&a),
        Command::Stencil(a) => commands::stencil(&a),
        Command::RatioGrid(a) => commands::ratio_grid(&a),
        Command::VerifyTheorems(a) => commands::verify_theorems(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::SimStudy(a) => commands::sim_study(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("matgrid: {e}");
            ExitCode::from(e.code())
        }
    }
}
