//! Game solvers against support enumeration, brute force and operator properties.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rarl_core::envs::make_tabular_game;
use rarl_core::oracle::{
    bellman_saddle_residual, best_response_values, cvar, equilibrium_gap, matrix_game_solve, profile_values,
    quantile_lower, shapley_backup, shapley_value_iteration, Responder,
};

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..rows).map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Solve for the mixed strategy on `support` that equalizes the opponent's payoffs on
/// `other`: `sum_i x_i m[i][j] = v` for `j` in `other`, `sum x = 1`.
fn equalizer(m: &[Vec<f64>], support: &[usize], other: &[usize], transpose: bool) -> Option<(Vec<f64>, f64)> {
    let k = support.len();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut b = DVector::zeros(k + 1);
    for (row, &j) in other.iter().enumerate() {
        for (col, &i) in support.iter().enumerate() {
            a[(row, col)] = if transpose { m[j][i] } else { m[i][j] };
        }
        a[(row, k)] = -1.0;
    }
    for col in 0..k {
        a[(k, col)] = 1.0;
    }
    b[k] = 1.0;
    let sol = a.lu().solve(&b)?;
    Some((sol.iter().take(k).copied().collect(), sol[k]))
}

/// All equilibria with equal-size supports; enough for non-degenerate games.
fn support_enumeration(m: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let (rows, cols) = (m.len(), m[0].len());
    let mut found = Vec::new();
    for k in 1..=rows.min(cols) {
        for si in subsets(rows, k) {
            for sj in subsets(cols, k) {
                let Some((xs, v)) = equalizer(m, &si, &sj, false) else { continue };
                let Some((ys, w)) = equalizer(m, &sj, &si, true) else { continue };
                if xs.iter().chain(&ys).any(|p| *p < -1e-12) || (v - w).abs() > 1e-9 {
                    continue;
                }
                let mut x = vec![0.0; rows];
                let mut y = vec![0.0; cols];
                si.iter().zip(&xs).for_each(|(&i, p)| x[i] = *p);
                sj.iter().zip(&ys).for_each(|(&j, p)| y[j] = *p);
                let col_ok = (0..cols).all(|j| (0..rows).map(|i| x[i] * m[i][j]).sum::<f64>() >= v - 1e-9);
                let row_ok = (0..rows).all(|i| (0..cols).map(|j| m[i][j] * y[j]).sum::<f64>() <= v + 1e-9);
                if col_ok && row_ok {
                    found.push((x, y, v));
                }
            }
        }
    }
    found
}

#[test]
fn lp_matches_support_enumeration_on_random_games() {
    for seed in 0..30 {
        let m = random_matrix(seed, 4, 5);
        let lp = matrix_game_solve(&m).unwrap();
        let eq = support_enumeration(&m);
        assert!(!eq.is_empty(), "seed {seed}: no equilibrium found");
        for (_, _, v) in &eq {
            assert!((lp.value - v).abs() < 1e-9, "seed {seed}: {} vs {v}", lp.value);
        }
        // A random non-degenerate game has a unique equilibrium.
        let (x, y, _) = &eq[0];
        for (a, b) in lp.row_strategy.iter().zip(x).chain(lp.col_strategy.iter().zip(y)) {
            assert!((a - b).abs() < 1e-8, "seed {seed}");
        }
        let (lo, hi) = lp.security_levels(&m);
        assert!((lo - lp.value).abs() < 1e-9 && (hi - lp.value).abs() < 1e-9);
    }
}

#[test]
fn pure_saddle_points_are_found() {
    // Row 1 dominates and column 2 is the row player's minimum there.
    let m = vec![vec![0.0, -2.0, -1.0], vec![3.0, 4.0, 1.5], vec![1.0, 0.5, -3.0]];
    let s = matrix_game_solve(&m).unwrap();
    assert!((s.value - 1.5).abs() < 1e-12);
    assert!((s.row_strategy[1] - 1.0).abs() < 1e-12);
    assert!((s.col_strategy[2] - 1.0).abs() < 1e-12);
}

/// Deterministic stationary policies of one player, as strategy tables.
fn pure_policies(n_states: usize, n_actions: usize) -> Vec<Vec<Vec<f64>>> {
    let total = n_actions.pow(n_states as u32);
    (0..total)
        .map(|mut code| {
            (0..n_states)
                .map(|_| {
                    let a = code % n_actions;
                    code /= n_actions;
                    (0..n_actions).map(|b| if a == b { 1.0 } else { 0.0 }).collect()
                })
                .collect()
        })
        .collect()
}

#[test]
fn best_response_matches_enumeration_of_pure_policies() {
    let game = make_tabular_game(5, 3, 3, 2).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let mut mixed = |n: usize| -> Vec<Vec<f64>> {
        (0..game.n_states)
            .map(|_| {
                let w: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
                let t: f64 = w.iter().sum();
                w.iter().map(|x| x / t).collect()
            })
            .collect()
    };
    let nu = mixed(game.n_actions2);
    let mu = mixed(game.n_actions1);
    let br1 = best_response_values(&game, &nu, Responder::Protagonist).unwrap();
    let br2 = best_response_values(&game, &mu, Responder::Adversary).unwrap();
    let pure1 = pure_policies(game.n_states, game.n_actions1);
    let pure2 = pure_policies(game.n_states, game.n_actions2);
    for s in 0..game.n_states {
        let best = pure1
            .iter()
            .map(|p| profile_values(&game, p, &nu).unwrap()[s])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - br1[s]).abs() < 1e-9, "state {s}: {best} vs {}", br1[s]);
        let worst = pure2
            .iter()
            .map(|p| profile_values(&game, &mu, p).unwrap()[s])
            .fold(f64::INFINITY, f64::min);
        assert!((worst - br2[s]).abs() < 1e-9);
    }
}

#[test]
fn shapley_solutions_satisfy_bellman_and_swap_antisymmetry() {
    for seed in 0..20 {
        let game = make_tabular_game(seed, 2 + seed as usize % 4, 2 + seed as usize % 3, 3).unwrap();
        let sol = shapley_value_iteration(&game, 1e-12).unwrap();
        assert!(bellman_saddle_residual(&game, &sol.values).unwrap() < 1e-7);
        let swapped = shapley_value_iteration(&game.swap_players(), 1e-12).unwrap();
        for (a, b) in sol.values.iter().zip(&swapped.values) {
            assert!((a + b).abs() < 1e-8, "seed {seed}");
        }
        assert!(equilibrium_gap(&game, &sol.row_strategies, &sol.col_strategies).unwrap() < 1e-8);
    }
}

#[test]
fn shapley_operator_is_a_discount_contraction() {
    let game = make_tabular_game(9, 4, 3, 3).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let u: Vec<f64> = (0..4).map(|_| r.random_range(-30.0..30.0)).collect();
        let v: Vec<f64> = (0..4).map(|_| r.random_range(-30.0..30.0)).collect();
        let tu: Vec<f64> = shapley_backup(&game, &u).unwrap().iter().map(|s| s.value).collect();
        let tv: Vec<f64> = shapley_backup(&game, &v).unwrap().iter().map(|s| s.value).collect();
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup(&tu, &tv) <= game.discount * sup(&u, &v) + 1e-9);
    }
    let sol = shapley_value_iteration(&game, 1e-12).unwrap();
    for w in sol.deltas.windows(2) {
        assert!(w[1] <= game.discount * w[0] + 1e-12);
    }
}

#[test]
fn standard_normal_cvar_matches_analytic_value() {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut r)).collect();
    // CVaR_alpha of N(0, 1) is -phi(z_alpha) / alpha with z_0.05 = -1.6448536.
    let z: f64 = -1.644_853_626_951_472_2;
    let analytic = -(-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.05;
    let stats = cvar(&x, 0.05).unwrap();
    assert!((stats.cvar - analytic).abs() < 0.05, "{} vs {analytic}", stats.cvar);
    assert!((stats.quantile - z).abs() < 0.05);
}

proptest! {
    #[test]
    fn quantile_and_cvar_follow_sorted_order(mut xs in prop::collection::vec(-1e6f64..1e6, 1..200), alpha in 0.01f64..0.99) {
        let q = quantile_lower(&xs, alpha).unwrap();
        let c = cvar(&xs, alpha).unwrap();
        xs.sort_by(f64::total_cmp);
        let k = ((alpha * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
        // Rank ceil(alpha n), up to the rounding guard for products within 1e-9 of an integer.
        prop_assert!(q == xs[k - 1] || (k >= 2 && q == xs[k - 2]));
        let tail: Vec<f64> = xs.iter().copied().filter(|v| *v <= q).collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        prop_assert!((c.cvar - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        prop_assert!(c.cvar <= q);
    }
}
