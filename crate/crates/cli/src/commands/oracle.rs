use anyhow::{Context, Result};
use serde_json::json;

use rarl_core::envs::{make_tabular_game, parse_tabular_game, write_tabular_game};
use rarl_core::oracle::{bellman_saddle_residual, shapley_value_iteration};

use super::read_input;
use crate::{GenGameArgs, OracleArgs, UsageError};

pub fn run_oracle(args: &OracleArgs) -> Result<()> {
    let text = read_input(&args.game)?;
    let game = parse_tabular_game(&text)
        .map_err(|e| UsageError(format!("{}: {e}", args.game.display())))?;
    let sol = shapley_value_iteration(&game, args.tol)?;
    let residual = bellman_saddle_residual(&game, &sol.values)?;
    let out = json!({
        "start_state": game.start_state,
        "value": sol.start_value(&game),
        "values": sol.values,
        "row_strategies": sol.row_strategies,
        "col_strategies": sol.col_strategies,
        "iterations": sol.iterations,
        "bellman_residual": residual,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

pub fn run_gen_game(args: &GenGameArgs) -> Result<()> {
    let game = make_tabular_game(args.seed, args.states, args.actions1, args.actions2)
        .map_err(|e| UsageError(e.to_string()))?;
    let game = if args.swap { game.swap_players() } else { game };
    let text = write_tabular_game(&game);
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
