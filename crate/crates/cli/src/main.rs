//! `fpfit`: estimate SDE parameters from sampled stationary densities.
//!
//! ```text
//! fpfit simulate   --out series.fts
//! fpfit build-pdf  --input series.fts --out pdf.csv
//! fpfit fit        --pdf pdf.csv --free k,c --init k=2,c=1
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpfit::estimator::SweepMode;
use fpfit::simulator::Scheme;

use config::{AxisSpec, RangeSpec, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fpfit",
    version,
    about = "Fokker-Planck residual fitting of SDE parameters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML); flags override its values.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for binning and fitness maps [default: all cores].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model name (lvs-additive, lvs-add-mult).
    #[arg(long)]
    pub model: Option<String>,

    /// Parameter values as name=value pairs, e.g. `k=1,c=0.5,nu=1`.
    #[arg(long, alias = "fixed", allow_hyphen_values = true)]
    pub params: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the SDE and store the sampled trajectory.
    Simulate(SimulateArgs),
    /// Bin a trajectory into a gridded density.
    BuildPdf(BuildPdfArgs),
    /// Evaluate the residual fitness at one parameter vector.
    Fitness(FitnessArgs),
    /// Evaluate the fitness over a grid of two parameters.
    Map(MapArgs),
    /// Estimate free parameters by minimizing the fitness.
    Fit(FitArgs),
    /// Solve one parameter as a function of another.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stored samples N.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_samples: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Transient steps discarded before storing [default: N].
    #[arg(long)]
    pub skip: Option<usize>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Binary output; metadata goes to `<out>.json` [default: series.fts].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the samples as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildPdfArgs {
    /// Time series written by `simulate` [default: series.fts].
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Lower domain corner, one value or one per axis [default: -4].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lower: Option<Vec<f64>>,
    /// Upper domain corner [default: 4].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub upper: Option<Vec<f64>>,
    /// Bins per axis [default: 50].
    #[arg(long)]
    pub bins: Option<usize>,
    /// CSV output, or binary when the name ends in `.fgf` [default: pdf.csv].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitnessArgs {
    /// Density file [default: pdf.csv].
    #[arg(long)]
    pub pdf: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write the residual and current fields next to the report.
    #[arg(long)]
    pub fields: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub pdf: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Row axis as `name:lower:upper:points`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<AxisSpec>,
    /// Column axis as `name:lower:upper:points`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<AxisSpec>,
    /// Points on both axes, overriding the axis specs.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long)]
    pub tol_x: Option<f64>,
    #[arg(long)]
    pub tol_f: Option<f64>,
    #[arg(long)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub pdf: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameters to estimate; the rest stay at their `--params` values.
    #[arg(long, value_delimiter = ',')]
    pub free: Option<Vec<String>>,
    /// Initial guesses for the free parameters, `name=value,…`.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    /// Known parameter values for percent-error reporting.
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub pdf: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter stepped through the given values.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Parameter solved at each value.
    #[arg(long)]
    pub solve: Option<String>,
    /// Explicit sweep values, solved in the given order.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "range"
    )]
    pub values: Option<Vec<f64>>,
    /// Uniform sweep values as `lower:upper:points`.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<RangeSpec>,
    /// Initial guess for the solved parameter.
    #[arg(long)]
    pub init: Option<f64>,
    /// `warm` chains each solution into the next start; `cold` restarts
    /// every point from `--init` and runs them in parallel.
    #[arg(long)]
    pub mode: Option<SweepModeArg>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum SweepModeArg {
    Warm,
    Cold,
}

impl From<SweepModeArg> for SweepMode {
    fn from(m: SweepModeArg) -> Self {
        match m {
            SweepModeArg::Warm => SweepMode::Warm,
            SweepModeArg::Cold => SweepMode::Cold,
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.common.threads.map(|t| t as usize).or(cfg.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let force = cli.common.force;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, a, force),
        Command::BuildPdf(a) => commands::build_pdf(&cfg, a, force),
        Command::Fitness(a) => commands::fitness(&cfg, a, force),
        Command::Map(a) => commands::map(&cfg, a, force),
        Command::Fit(a) => commands::fit(&cfg, a, force),
        Command::Sweep(a) => commands::sweep(&cfg, a, force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(code)
        }
    }
}
