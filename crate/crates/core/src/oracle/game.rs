use nalgebra::{DMatrix, DVector};

use super::simplex::simplex_max;
use crate::envs::TabularGame;
use crate::error::{invalid, Error, Result};

/// Optimal mixed strategies of a zero-sum matrix game (row player maximizes).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
    /// `|primal objective - dual objective|` of the underlying linear program.
    pub duality_gap: f64,
}

impl MatrixGameSolution {
    /// `(min_j x^T M e_j, max_i e_i^T M y)`: the security levels the two strategies
    /// guarantee. Both equal `value` at an equilibrium.
    pub fn security_levels(&self, m: &[Vec<f64>]) -> (f64, f64) {
        security_levels(m, &self.row_strategy, &self.col_strategy)
    }
}

pub fn security_levels(m: &[Vec<f64>], x: &[f64], y: &[f64]) -> (f64, f64) {
    let cols = m.first().map_or(0, |r| r.len());
    let lower = (0..cols)
        .map(|j| m.iter().zip(x).map(|(row, xi)| xi * row[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let upper = m
        .iter()
        .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    (lower, upper)
}

fn to_distribution(w: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.iter().map(|v| v / total).collect()
}

/// Solve `max_x min_y x^T M y` by linear programming.
///
/// With `M' = M + shift > 0`, the column player's program
/// `max 1^T w  s.t.  M' w <= 1, w >= 0` has optimum `1 / v'`; `w` normalized is the
/// column strategy and the constraint prices normalized are the row strategy.
pub fn matrix_game_solve(m: &[Vec<f64>]) -> Result<MatrixGameSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(invalid("payoff matrix", "needs at least one row and one column"));
    }
    if m.iter().any(|r| r.len() != cols) {
        return Err(invalid("payoff matrix", "ragged rows"));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("payoff matrix"));
    }
    let min = m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let shifted: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
    let lp = simplex_max(&vec![1.0; cols], &shifted, &vec![1.0; rows])?;
    let primal: f64 = lp.x.iter().sum();
    let dual: f64 = lp.dual.iter().sum();
    if !(primal > 0.0) {
        return Err(invalid("payoff matrix", "degenerate linear program"));
    }
    Ok(MatrixGameSolution {
        row_strategy: to_distribution(&lp.dual),
        col_strategy: to_distribution(&lp.x),
        value: 1.0 / primal - shift,
        duality_gap: (primal - dual).abs(),
    })
}

/// Fixed point of the Shapley operator and the per-state equilibrium strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleySolution {
    pub values: Vec<f64>,
    /// Protagonist strategy per state.
    pub row_strategies: Vec<Vec<f64>>,
    /// Adversary strategy per state.
    pub col_strategies: Vec<Vec<f64>>,
    pub iterations: usize,
    /// `||V_{k+1} - V_k||_inf` after each sweep.
    pub deltas: Vec<f64>,
}

impl ShapleySolution {
    pub fn start_value(&self, game: &TabularGame) -> f64 {
        self.values[game.start_state]
    }
}

pub const MAX_SHAPLEY_ITERATIONS: usize = 1_000_000;

/// One application of the Shapley operator: per-state matrix-game values of `Q(s, v)`.
pub fn shapley_backup(game: &TabularGame, v: &[f64]) -> Result<Vec<MatrixGameSolution>> {
    (0..game.n_states).map(|s| matrix_game_solve(&game.q_matrix(s, v))).collect()
}

/// `V_{k+1}(s) = val(Q_k(s))` from `V_0 = 0` until successive iterates differ by less
/// than `tol` in the sup norm.
pub fn shapley_value_iteration(game: &TabularGame, tol: f64) -> Result<ShapleySolution> {
    game.validate()?;
    if !(game.discount < 1.0) {
        return Err(invalid("discount", "value iteration needs a discount below 1"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut v = vec![0.0; game.n_states];
    let mut deltas = Vec::new();
    for k in 1..=MAX_SHAPLEY_ITERATIONS {
        let sols = shapley_backup(game, &v)?;
        let next: Vec<f64> = sols.iter().map(|s| s.value).collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        deltas.push(delta);
        v = next;
        if delta < tol {
            let sols = shapley_backup(game, &v)?;
            return Ok(ShapleySolution {
                values: v,
                row_strategies: sols.iter().map(|s| s.row_strategy.clone()).collect(),
                col_strategies: sols.iter().map(|s| s.col_strategy.clone()).collect(),
                iterations: k,
                deltas,
            });
        }
    }
    Err(Error::NoConvergence(MAX_SHAPLEY_ITERATIONS))
}

/// `max_s |V(s) - val(Q(s, V))|`.
pub fn bellman_saddle_residual(game: &TabularGame, v: &[f64]) -> Result<f64> {
    Ok(shapley_backup(game, v)?
        .iter()
        .zip(v)
        .map(|(s, x)| (s.value - x).abs())
        .fold(0.0, f64::max))
}

fn check_strategies(game: &TabularGame, strategy: &[Vec<f64>], n_actions: usize, who: &'static str) -> Result<()> {
    if strategy.len() != game.n_states || strategy.iter().any(|r| r.len() != n_actions) {
        return Err(invalid(who, "strategy table does not match the game"));
    }
    Ok(())
}

/// Exact discounted values of a stationary strategy profile: solves
/// `(I - gamma P_{mu,nu}) V = r_{mu,nu}`.
pub fn profile_values(game: &TabularGame, mu: &[Vec<f64>], nu: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_strategies(game, mu, game.n_actions1, "mu")?;
    check_strategies(game, nu, game.n_actions2, "nu")?;
    let n = game.n_states;
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        for (a1, p1) in mu[s].iter().enumerate() {
            for (a2, p2) in nu[s].iter().enumerate() {
                let w = p1 * p2;
                if w == 0.0 {
                    continue;
                }
                r[s] += w * game.reward(s, a1, a2);
                for (s2, p) in game.next_distribution(s, a1, a2).iter().enumerate() {
                    a[(s, s2)] -= game.discount * w * p;
                }
            }
        }
    }
    let v = a
        .lu()
        .solve(&r)
        .ok_or_else(|| invalid("profile", "singular policy-evaluation system"))?;
    Ok(v.iter().copied().collect())
}

/// Which side is best-responding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Responder {
    /// Maximizes against a fixed adversary strategy.
    Protagonist,
    /// Minimizes against a fixed protagonist strategy.
    Adversary,
}

/// Optimal values (in protagonist reward) of the single-agent MDP faced by `responder`
/// when the other side plays `fixed`, by value iteration to `1e-13`.
pub fn best_response_values(game: &TabularGame, fixed: &[Vec<f64>], responder: Responder) -> Result<Vec<f64>> {
    let (own, other) = match responder {
        Responder::Protagonist => (game.n_actions1, game.n_actions2),
        Responder::Adversary => (game.n_actions2, game.n_actions1),
    };
    check_strategies(game, fixed, other, "fixed strategy")?;
    if !(game.discount < 1.0) {
        return Err(invalid("discount", "value iteration needs a discount below 1"));
    }
    let n = game.n_states;
    let mut v = vec![0.0; n];
    for _ in 0..MAX_SHAPLEY_ITERATIONS {
        let mut next = vec![0.0; n];
        for (s, out) in next.iter_mut().enumerate() {
            let q = game.q_matrix(s, &v);
            let values = (0..own).map(|a| {
                fixed[s]
                    .iter()
                    .enumerate()
                    .map(|(b, p)| match responder {
                        Responder::Protagonist => p * q[a][b],
                        Responder::Adversary => p * q[b][a],
                    })
                    .sum::<f64>()
            });
            *out = match responder {
                Responder::Protagonist => values.fold(f64::NEG_INFINITY, f64::max),
                Responder::Adversary => values.fold(f64::INFINITY, f64::min),
            };
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-13 {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence(MAX_SHAPLEY_ITERATIONS))
}

/// Exploitability of a strategy profile at the start state:
/// `max(BR_mu(nu) - V, V - BR_nu(mu))` in protagonist reward. Non-negative, zero at Nash.
pub fn equilibrium_gap(game: &TabularGame, mu: &[Vec<f64>], nu: &[Vec<f64>]) -> Result<f64> {
    let s0 = game.start_state;
    let v = profile_values(game, mu, nu)?[s0];
    let br1 = best_response_values(game, nu, Responder::Protagonist)?[s0];
    let br2 = best_response_values(game, mu, Responder::Adversary)?[s0];
    Ok((br1 - v).max(v - br2).max(0.0))
}
