use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exit codes: 0 inertial or converged, 1 not inertial, 2 bad input or
/// failed precondition, 3 iteration cap or cycle.
#[derive(Parser)]
#[command(name = "inertial", version, about = "Inertial Nash equilibria of population games with switching costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether a point is a Nash and an inertial equilibrium.
    Verify(VerifyArgs),
    /// Run the projection algorithm or the better-response dynamics.
    Solve(SolveArgs),
    /// Sample-based monotonicity test of F or -u.
    Probe(ProbeArgs),
    /// Build a ride-hailing game from node and edge files.
    Scenario(ScenarioArgs),
    /// Generate a seeded random game.
    Gen(GenArgs),
    /// Repeat solver runs from random starts and summarize iteration counts.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Game file (single- or multi-class).
    pub game: PathBuf,
    /// Comma-separated point, e.g. 0.4,0.3,0.3.
    #[arg(long, conflicts_with = "point_file", required_unless_present = "point_file")]
    pub point: Option<String>,
    /// JSON array (nested per class for multi-class games) or a result file.
    #[arg(long)]
    pub point_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Projection,
    BetterResponse,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    EqualShare,
    PerTarget,
    UtilityWeighted,
    /// Moves `--amount` out of every envious action regardless of its mass.
    FixedMass,
}

/// Solver parameters shared by `solve` and `experiment`. Omitted step
/// parameters default to the recommended values for the game.
#[derive(Args, Clone)]
pub struct SolverParams {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "equal-share")]
    pub policy: PolicyArg,
    /// Mass moved per step by the fixed-mass policy.
    #[arg(long)]
    pub amount: Option<f64>,
    /// Step-norm stopping threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Skip the convergence preconditions.
    #[arg(long = "unsafe")]
    pub unsafe_run: bool,
    /// Asynchronous better-response updates in seeded random order.
    #[arg(long = "async")]
    pub asynchronous: bool,
}

#[derive(Args)]
pub struct SolveArgs {
    pub game: PathBuf,
    #[arg(long, value_enum, default_value = "projection")]
    pub algorithm: AlgorithmArg,
    #[command(flatten)]
    pub params: SolverParams,
    /// `uniform`, `random`, a comma-separated point, or a JSON file.
    #[arg(long, default_value = "uniform")]
    pub x0: String,
    #[arg(long, env = "INERTIAL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Result JSON path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trajectory CSV path.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorArg {
    F,
    MinusU,
}

#[derive(Args)]
pub struct ProbeArgs {
    pub game: PathBuf,
    #[arg(long, value_enum, default_value = "f")]
    pub operator: OperatorArg,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, env = "INERTIAL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Finite-difference step for the Jacobian samples.
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScenarioArgs {
    /// Scenario config JSON {beta, big_cost, gamma, nodes_path, edges_path}.
    #[arg(required_unless_present = "synthetic")]
    pub config: Option<PathBuf>,
    /// Use the bundled 18-node synthetic city instead of a config file.
    #[arg(long, conflicts_with = "config")]
    pub synthetic: bool,
    /// Total mass for the synthetic city.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Affine,
    RideHailing,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "INERTIAL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "affine")]
    pub family: FamilyArg,
    /// `lo,hi` for affine intercepts.
    #[arg(long, default_value = "0.5,2")]
    pub a_range: String,
    /// `lo,hi` for affine slopes.
    #[arg(long, default_value = "0.5,2")]
    pub b_range: String,
    #[arg(long, default_value = "30,140")]
    pub alpha_range: String,
    #[arg(long, default_value = "1.5,8")]
    pub p_range: String,
    #[arg(long, default_value_t = 6.34)]
    pub beta: f64,
    #[arg(long, default_value = "0.05,1")]
    pub cost_range: String,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmsArg {
    Both,
    Projection,
    BetterResponse,
}

#[derive(Args)]
pub struct ExperimentArgs {
    pub game: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    #[arg(long, env = "INERTIAL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    pub algorithms: AlgorithmsArg,
    #[command(flatten)]
    pub params: SolverParams,
    /// Per-run and summary CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run repetitions one at a time.
    #[arg(long)]
    pub sequential: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(a) => commands::verify(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Probe(a) => commands::probe(&a),
        Command::Scenario(a) => commands::scenario(&a),
        Command::Gen(a) => commands::gen(&a),
        Command::Experiment(a) => commands::experiment(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_INPUT)
        }
    }
}
