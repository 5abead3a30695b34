//! `leakynorm`: fit minimum-norm leaky-ReLU networks from the command line.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 invalid input or
//! configuration, 3 resource limit, 4 infeasible, 5 not converged.

mod commands;
mod run;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "leakynorm", version, about = "Minimum-norm leaky-ReLU networks via finite convex programs")]
struct Cli {
    /// TOML file with defaults for any flag (top level or per-subcommand table).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the sign patterns realizable on a dataset.
    Patterns(PatternsArgs),
    /// Solve a convex program and reconstruct the network.
    Fit(FitArgs),
    /// Train a finite network by full-batch gradient descent.
    TrainGd(TrainGdArgs),
    /// Solve the discretized dictionary LP (scalar inputs only).
    Oracle(OracleArgs),
    /// Evaluate a network on a dataset and/or a grid.
    Eval(EvalArgs),
    /// Compare two networks on a grid.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the label column [default: y].
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Args, Clone)]
pub struct EnumArgs {
    /// Largest N searched exhaustively in d > 1 [default: 20].
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Search exhaustively above the cutoff.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone)]
pub struct GridArgs {
    /// Lower grid corner, comma separated [default: -1 per coordinate].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<f64>>,
    /// Upper grid corner, comma separated [default: 1 per coordinate].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<f64>>,
    /// Grid spacing [default: 0.01 for d = 1, 0.02 for d = 2].
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Args)]
pub struct PatternsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub enumeration: EnumArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub enumeration: EnumArgs,
    /// weights, joint or margin [default: weights].
    #[arg(long)]
    pub formulation: Option<String>,
    /// Leaky-ReLU slope, anything but 1 [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Primal, dual and gap tolerance [default: 1e-8].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Solver iteration limit [default: 200000].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Recorded in the manifest; the solver itself is deterministic [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Blocks with norm at or below this are dropped [default: 1e-7].
    #[arg(long)]
    pub prune_tol: Option<f64>,
    /// Also write the dense program as program.json.
    #[arg(long)]
    pub dump_program: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainGdArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden width [default: 1000].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Step size [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Standard deviation of the Gaussian initialization [default: 1e-3].
    #[arg(long)]
    pub init_std: Option<f64>,
    /// Stop once the mean loss is below this [default: 1e-4].
    #[arg(long)]
    pub target_loss: Option<f64>,
    /// [default: 10000000]
    #[arg(long)]
    pub max_epochs: Option<u64>,
    /// squared or logistic [default: squared].
    #[arg(long)]
    pub loss: Option<String>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// weights, joint or margin [default: weights].
    #[arg(long)]
    pub formulation: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Bias spacing, or angle spacing for joint [default: 1e-3, or 2e-4·π].
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Network JSON.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Dataset to report residuals, margins and losses on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
    /// Skip grid sampling.
    #[arg(long)]
    pub no_grid: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub net_a: Option<PathBuf>,
    #[arg(long)]
    pub net_b: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report the fraction of grid points with matching sign instead of the L∞ distance.
    #[arg(long)]
    pub sign_agreement: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Patterns(a) => commands::patterns(config, a),
        Command::Fit(a) => commands::fit(config, a),
        Command::TrainGd(a) => commands::train_gd(config, a),
        Command::Oracle(a) => commands::oracle(config, a),
        Command::Eval(a) => commands::eval(config, a),
        Command::Compare(a) => commands::compare(config, a),
    };
    match result {
        Ok(()) => ExitCode::from(run::EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
