mod commands;
mod output;
mod specs;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specs::{AllocSpec, List, MomentsSpec, StateSpec, WeightsSpec};

/// Overlapped-grouping measurement strategies for Pauli-sum energies.
#[derive(Debug, Parser)]
#[command(name = "overgroup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition a Hamiltonian with sorted insertion.
    Group(GroupArgs),
    /// Grow a disjoint grouping into an overlapped one.
    Repack(RepackArgs),
    /// Analytic estimator variance for a grouping and allocation.
    Variance(VarianceArgs),
    /// Sample repeated energy estimates from a state.
    Simulate(SimulateArgs),
    /// Variance ratios on the adversarial family, one row per L.
    #[command(name = "theorem1", alias = "theorem-1")]
    Theorem1(Theorem1Args),
    /// Variance split of the all-to-all Ising model in its witness state.
    #[command(name = "appendixA", alias = "appendix-a")]
    AppendixA(AppendixAArgs),
    /// Three-operator example where an insertion can raise the variance.
    #[command(name = "appendixB", alias = "appendix-b")]
    AppendixB(AppendixBArgs),
    /// Diagonal and covariance parts on the 2 x n spinless Hubbard model.
    Hubbard(HubbardArgs),
    /// Repacking gains on random Hamiltonians.
    #[command(name = "random_scaling", alias = "random-scaling")]
    RandomScaling(RandomScalingArgs),
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// Hamiltonian in text (`coeff LABEL` per line) or JSON form.
    ham: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum RepackMode {
    Posthoc,
    Adhoc,
}

#[derive(Debug, Args)]
struct RepackArgs {
    ham: PathBuf,
    grouping: PathBuf,
    #[arg(long, value_enum)]
    mode: RepackMode,
    /// JSON array of circuits, one per group (post-hoc only); synthesized
    /// when absent.
    #[arg(long)]
    circuits: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    ham: PathBuf,
    grouping: PathBuf,
    #[arg(long, default_value = "l2")]
    alloc: AllocSpec,
    /// zerocov, worstcase or state:<zero|product:SEED|witness|file:PATH|PATH>
    #[arg(long, default_value = "zerocov")]
    moments: MomentsSpec,
    #[arg(long, default_value = "heuristic")]
    weights: WeightsSpec,
    #[arg(long, default_value_t = 1.0)]
    shots: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    ham: PathBuf,
    grouping: PathBuf,
    /// zero, product:SEED, witness or file:PATH
    #[arg(long, default_value = "zero")]
    state: StateSpec,
    #[arg(long)]
    shots: u64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "l2")]
    alloc: AllocSpec,
    /// CSV of estimates; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one extra round of raw outcomes, one file per group.
    #[arg(long)]
    raw_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Theorem1Args {
    #[arg(long = "L-list", default_value = "4,8,16,32")]
    l_list: List,
    /// Unit coefficients instead of the perturbed ones.
    #[arg(long)]
    unit: bool,
    #[arg(long, default_value_t = 1.0)]
    shots: f64,
    /// Also write each instance as JSON into this directory.
    #[arg(long)]
    instances_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AppendixAArgs {
    #[arg(long = "n-list", default_value = "4,6,8")]
    n_list: List,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AppendixBArgs {
    #[arg(long = "cA", allow_hyphen_values = true)]
    c_a: f64,
    #[arg(long = "cB", allow_hyphen_values = true)]
    c_b: f64,
    #[arg(long = "cC", default_value_t = 1.0, allow_hyphen_values = true)]
    c_c: f64,
    #[arg(long = "M1")]
    m1: f64,
    #[arg(long = "M2")]
    m2: f64,
    #[arg(long = "sigmaA2", default_value_t = 1.0)]
    var_a: f64,
    #[arg(long = "sigmaB2", default_value_t = 1.0)]
    var_b: f64,
    #[arg(long = "sigmaC2", default_value_t = 1.0)]
    var_c: f64,
    #[arg(long = "sigmaAB", default_value_t = 1.0, allow_hyphen_values = true)]
    cov_ab: f64,
    #[arg(long = "sigmaAC", default_value_t = 0.0, allow_hyphen_values = true)]
    cov_ac: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HubbardArgs {
    #[arg(long = "n-list", default_value = "2..5")]
    n_list: List,
    #[arg(long, default_value_t = 200)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    #[arg(long = "V", default_value_t = 1.0, allow_hyphen_values = true)]
    v: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RandomScalingArgs {
    #[arg(long = "n-list", default_value = "4..8")]
    n_list: List,
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<overgroup::Error> for CliError {
    fn from(e: overgroup::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OVERGROUP_THREADS") else { return Ok(()) };
    let threads: usize =
        v.trim().parse().map_err(|_| CliError::invalid(format!("OVERGROUP_THREADS must be an integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::invalid(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Group(a) => commands::group(&a.ham, a.out.as_deref()),
        Command::Repack(a) => commands::repack(&a),
        Command::Variance(a) => commands::variance(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Theorem1(a) => commands::theorem1(&a),
        Command::AppendixA(a) => commands::appendix_a(&a),
        Command::AppendixB(a) => commands::appendix_b(&a),
        Command::Hubbard(a) => commands::hubbard(&a),
        Command::RandomScaling(a) => commands::random_scaling(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("overgroup: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
