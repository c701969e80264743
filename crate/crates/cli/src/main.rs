use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointer_anneal::{Case, SimParams};

mod commands;
mod output;

/// Worker-pool size for sweeps and threshold searches.
const THREADS_ENV: &str = "POINTER_ANNEAL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "pointer-anneal",
    version,
    about = "Annealing-pointer collective measurement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one measurement and write the pointer trajectory
    Simulate(SimulateArgs),
    /// Compare the collision engine with the dense oracle (N <= 16)
    Verify(VerifyArgs),
    /// Search the minimum N reaching a target for each epsilon
    Threshold(ThresholdArgs),
    /// Final scalars over an (epsilon, N) grid
    Sweep(SweepArgs),
    /// Fit N_min = lambda / epsilon^2 to a CSV of thresholds
    Fit(FitArgs),
    /// Adiabatic metric and gap of the effective pointer Hamiltonian
    Adiabatic(AdiabaticArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.5)]
    pub h: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long = "t-final", default_value_t = 10.0)]
    pub t_final: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, value_enum, default_value_t = CaseArg::Phi)]
    pub case: CaseArg,
    /// Integrator substeps per segment (default depends on N)
    #[arg(long)]
    pub substeps: Option<usize>,
}

impl ModelArgs {
    pub fn params(&self) -> pointer_anneal::Result<SimParams> {
        let mut p = SimParams::new(self.epsilon, self.n)?
            .with_h(self.schedule.h)
            .with_gamma(self.schedule.gamma)
            .with_t_final(self.schedule.t_final)
            .with_case(self.case.into());
        if let Some(s) = self.substeps {
            p = p.with_substeps(s);
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; without it results go to stdout and no manifest is written
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = EngineArg::Collision)]
    pub engine: EngineArg,
    /// Number of uniform time intervals; the trajectory has samples + 1 rows
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    #[arg(long = "epsilon-list", value_delimiter = ',', required = true)]
    pub epsilon_list: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub target: f64,
    #[arg(long, value_enum, default_value_t = QuantityArg::P1)]
    pub quantity: QuantityArg,
    #[arg(long, value_enum, default_value_t = GridArg::Pow2)]
    pub grid: GridArg,
    #[arg(long = "n-cap", default_value_t = 1 << 20)]
    pub n_cap: usize,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long = "epsilon-list", value_delimiter = ',', required = true)]
    pub epsilon_list: Vec<f64>,
    #[arg(long = "n-list", value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV with columns epsilon,n_min (extra columns are ignored)
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct AdiabaticArgs {
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseArg {
    Phi,
    Psi,
}

impl From<CaseArg> for Case {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Phi => Case::Phi,
            CaseArg::Psi => Case::Psi,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineArg {
    Collision,
    Dense,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantityArg {
    P1,
    Fidelity,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridArg {
    Pow2,
    Bisect,
}

/// Raised when `verify` finds the engines further apart than `--tol`.
#[derive(Debug)]
pub struct ToleranceBreach;

impl std::fmt::Display for ToleranceBreach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("discrepancy exceeds tolerance")
    }
}

impl std::error::Error for ToleranceBreach {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use pointer_anneal::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParameter(_)) => 2,
        Some(Error::Convergence(_)) | Some(Error::Consistency(_)) => 3,
        Some(Error::Resource(_)) => 4,
        None => 1,
    }
}

fn init_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = init_pool() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Threshold(a) => commands::threshold(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Adiabatic(a) => commands::adiabatic(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
