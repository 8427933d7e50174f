mod eval;
mod gradcheck;
mod oracle;
mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::ExperimentConfig;
use crate::{Cli, Command, UsageError, RUN_ROOT_VAR};

pub use eval::{summary_csv, SUMMARY_HEADER};

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(UsageError("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Oracle(a) => oracle::run_oracle(a),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::GenGame(a) => oracle::run_gen_game(a),
    })
}

pub(crate) fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))
        .map_err(Into::into)
}

pub(crate) fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => read_input(p)?,
        None => String::new(),
    };
    Ok(ExperimentConfig::resolve(&text, overrides)?)
}

/// `$RARL_RUN_ROOT`, or `runs` in the working directory.
pub(crate) fn run_root() -> PathBuf {
    std::env::var_os(RUN_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}
