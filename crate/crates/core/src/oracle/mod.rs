//! Exact solvers used as ground truth: matrix games by linear programming, Shapley value
//! iteration for discounted zero-sum Markov games, best responses, and tail-risk metrics.

mod game;
mod risk;
mod simplex;

pub use game::{
    bellman_saddle_residual, best_response_values, equilibrium_gap, matrix_game_solve, profile_values,
    security_levels, shapley_backup, shapley_value_iteration, MatrixGameSolution, Responder, ShapleySolution,
    MAX_SHAPLEY_ITERATIONS,
};
pub use risk::{cvar, lower_rank, quantile_lower, RiskStats};
pub use simplex::{simplex_max, LpSolution};
