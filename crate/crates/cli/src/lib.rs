//! The `rarl` command line: train, evaluate, solve tabular games, check gradients and
//! generate games.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

pub mod commands;
pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Error the user can fix by changing arguments or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Environment variable holding the default output root for run directories.
pub const RUN_ROOT_VAR: &str = "RARL_RUN_ROOT";

#[derive(Debug, Parser)]
#[command(name = "rarl", version, about = "Robust adversarial reinforcement learning lab")]
pub struct Cli {
    /// Worker threads for rollouts and evaluation (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a protagonist (and adversary) and write a run directory.
    Train(TrainArgs),
    /// Evaluate trained runs.
    Eval(EvalArgs),
    /// Solve a tabular zero-sum Markov game and print the solution as JSON.
    Oracle(OracleArgs),
    /// Check analytic derivatives against finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a random tabular game file.
    GenGame(GenGameArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `section.key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Train against a zero-strength adversary.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train this many consecutive seeds, one run directory each.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Run directory (default: `$RARL_RUN_ROOT/<env>-<mode>-seed<seed>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Mass,
    Friction,
    Joint,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory to evaluate.
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub sweep: Vec<SweepKind>,
    /// Second run evaluated on the same sweep grid; cell-wise differences are written too.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Train an attack adversary against the frozen protagonist and evaluate under it.
    #[arg(long)]
    pub attack: bool,
    /// Export the trained adversary's mean force over probe states.
    #[arg(long)]
    pub force_field: bool,
    /// Percentile curve of final rewards across `--runs`.
    #[arg(long)]
    pub percentiles: bool,
    #[arg(long, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// `eval.key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (default: `<run>/eval`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub game: PathBuf,
    /// Value-iteration stopping tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt one analytic derivative (grad_log_prob | surrogate_gradient |
    /// fisher_vector_product); for testing the checker itself.
    #[arg(long, hide = true)]
    pub perturb: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenGameArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    #[arg(long, default_value_t = 3)]
    pub actions1: usize,
    #[arg(long, default_value_t = 3)]
    pub actions2: usize,
    /// Write the game with the players' roles exchanged.
    #[arg(long)]
    pub swap: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let usage = err.chain().any(|e| {
        e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<config::ConfigError>().is_some()
    });
    if usage {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
