use std::ops::Range;

use rayon::prelude::*;

use super::advantages::AdvantageBatch;
use super::config::OptimizerConfig;
use crate::error::{check_dim, Error, Result};
use crate::policy::{PolicyParams, StochasticPolicy};

/// Batch shard size. Shards are reduced in index order, so results do not depend on
/// the number of worker threads.
const SHARD: usize = 256;

fn shards(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(SHARD))
        .map(|k| k * SHARD..((k + 1) * SHARD).min(n))
        .collect()
}

fn sum_vectors(parts: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p) {
            *o += x;
        }
    }
    out
}

fn par_log_probs(policy: &dyn StochasticPolicy, params: &[f64], batch: &AdvantageBatch) -> Vec<f64> {
    shards(batch.len())
        .into_par_iter()
        .map(|r| policy.log_probs(params, &batch.states[r.clone()], &batch.actions[r]))
        .collect::<Vec<_>>()
        .concat()
}

/// `sum_i weights[i] grad log pi(a_i | s_i)` plus the log-probabilities, sharded.
fn par_weighted_grad(
    policy: &dyn StochasticPolicy,
    params: &[f64],
    batch: &AdvantageBatch,
    weights: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dim = policy.param_count();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = shards(batch.len())
        .into_par_iter()
        .map(|r| {
            let mut g = vec![0.0; dim];
            let lp = policy.accumulate_grad_log_prob(
                params,
                &batch.states[r.clone()],
                &batch.actions[r.clone()],
                &weights[r],
                &mut g,
            );
            (g, lp)
        })
        .collect();
    let (grads, lps): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    (sum_vectors(grads, dim), lps.concat())
}

/// Mean KL divergence over the batch states, sharded.
pub fn mean_kl(policy: &dyn StochasticPolicy, old: &[f64], new: &[f64], states: &[Vec<f64>]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Empty("state batch for KL"));
    }
    let parts: Vec<f64> = shards(states.len())
        .into_par_iter()
        .map(|r| policy.kl_sum(old, new, &states[r]))
        .collect();
    Ok(parts.iter().sum::<f64>() / states.len() as f64)
}

/// `L(theta) = mean[exp(log pi_theta - old_log_probs) A]`.
pub fn surrogate(
    policy: &dyn StochasticPolicy,
    theta: &[f64],
    old_log_probs: &[f64],
    batch: &AdvantageBatch,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("surrogate batch"));
    }
    let lp = par_log_probs(policy, theta, batch);
    let total: f64 = lp
        .iter()
        .zip(old_log_probs)
        .zip(&batch.advantages)
        .map(|((l, o), a)| (l - o).exp() * a)
        .sum();
    Ok(total / batch.len() as f64)
}

/// Surrogate value and its exact gradient at `theta`, with importance ratios taken
/// against `theta_old`.
pub fn surrogate_and_gradient(
    policy: &dyn StochasticPolicy,
    theta_old: &[f64],
    theta: &[f64],
    batch: &AdvantageBatch,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("surrogate batch"));
    }
    check_dim("theta", policy.param_count(), theta.len())?;
    let n = batch.len() as f64;
    let old = par_log_probs(policy, theta_old, batch);
    let new = par_log_probs(policy, theta, batch);
    let weights: Vec<f64> = new
        .iter()
        .zip(&old)
        .zip(&batch.advantages)
        .map(|((l, o), a)| (l - o).exp() * a / n)
        .collect();
    let loss = weights.iter().sum();
    let (grad, _) = par_weighted_grad(policy, theta, batch, &weights);
    Ok((loss, grad))
}

/// `(F + damping I) v` with `F` the mean Fisher information over `states`.
pub fn fisher_vector_product(
    policy: &dyn StochasticPolicy,
    theta: &[f64],
    states: &[Vec<f64>],
    v: &[f64],
    damping: f64,
) -> Vec<f64> {
    let dim = policy.param_count();
    let parts: Vec<Vec<f64>> = shards(states.len())
        .into_par_iter()
        .map(|r| {
            let mut out = vec![0.0; dim];
            policy.fisher_accumulate(theta, &states[r], v, &mut out);
            out
        })
        .collect();
    let n = states.len().max(1) as f64;
    let mut out = sum_vectors(parts, dim);
    for (o, x) in out.iter_mut().zip(v) {
        *o = *o / n + damping * x;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximately solve `A x = b` for symmetric positive-definite `A` given as a
/// matrix-vector product. Returns `x` and the final residual norm.
pub fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], iters: usize, tol: f64) -> (Vec<f64>, f64) {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr <= tol * tol {
            break;
        }
        let z = apply(&p);
        let pz = dot(&p, &z);
        if pz <= 0.0 || !pz.is_finite() {
            break;
        }
        let alpha = rr / pz;
        for ((x, r), (p, z)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&z)) {
            *x += alpha * p;
            *r -= alpha * z;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (p, r) in p.iter_mut().zip(&r) {
            *p = r + beta * *p;
        }
        rr = rr_new;
    }
    (x, rr.sqrt())
}

/// Why a trust-region step left the parameters unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRejection {
    NonFiniteGradient,
    ZeroGradient,
    NonPositiveCurvature,
    LineSearchFailed,
}

impl std::fmt::Display for StepRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepRejection::NonFiniteGradient => "non-finite gradient",
            StepRejection::ZeroGradient => "zero gradient",
            StepRejection::NonPositiveCurvature => "non-positive curvature",
            StepRejection::LineSearchFailed => "line search failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    /// Mean KL between the old and the returned parameters.
    pub kl: f64,
    pub cg_residual: f64,
    pub backtracks: usize,
    pub grad_norm: f64,
    /// `<x, (F + damping I) x>` for the search direction `x`; positive when the damped
    /// Fisher is positive definite along it.
    pub curvature: f64,
    pub rejection: Option<StepRejection>,
}

impl StepDiagnostics {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TrpoOutcome {
    pub params: PolicyParams,
    pub diagnostics: StepDiagnostics,
}

/// One KL-constrained natural-gradient step with backtracking line search.
///
/// The direction `x ~ (F + damping I)^-1 g` comes from `config.cg_iters` conjugate
/// gradient iterations. The full step is scaled so that its quadratic KL model equals
/// `kl_delta`, then shrunk by `backtrack_ratio` until the exact mean KL is within the
/// trust region and the surrogate strictly improves. If no candidate qualifies the old
/// parameters are returned.
pub fn trpo_step(
    policy: &dyn StochasticPolicy,
    theta_old: &PolicyParams,
    batch: &AdvantageBatch,
    config: &OptimizerConfig,
) -> Result<TrpoOutcome> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::Empty("trpo batch"));
    }
    check_dim("theta", policy.param_count(), theta_old.len())?;
    let n = batch.len() as f64;
    let weights: Vec<f64> = batch.advantages.iter().map(|a| a / n).collect();
    let (grad, old_lp) = par_weighted_grad(policy, theta_old, batch, &weights);
    let surrogate_before = surrogate(policy, theta_old, &old_lp, batch)?;
    let grad_norm = dot(&grad, &grad).sqrt();
    let mut diag = StepDiagnostics {
        surrogate_before,
        surrogate_after: surrogate_before,
        kl: 0.0,
        cg_residual: 0.0,
        backtracks: 0,
        grad_norm,
        curvature: 0.0,
        rejection: None,
    };
    let unchanged = |diag: StepDiagnostics, why: StepRejection| TrpoOutcome {
        params: theta_old.clone(),
        diagnostics: StepDiagnostics {
            rejection: Some(why),
            ..diag
        },
    };
    if !grad_norm.is_finite() {
        return Ok(unchanged(diag, StepRejection::NonFiniteGradient));
    }
    if grad_norm == 0.0 {
        return Ok(unchanged(diag, StepRejection::ZeroGradient));
    }

    let fisher_states: Vec<Vec<f64>> = if config.fisher_subsample > 1 {
        batch.states.iter().step_by(config.fisher_subsample).cloned().collect()
    } else {
        batch.states.clone()
    };
    let apply = |v: &[f64]| fisher_vector_product(policy, theta_old, &fisher_states, v, config.cg_damping);
    let (x, residual) = conjugate_gradient(&apply, &grad, config.cg_iters, 1e-10);
    diag.cg_residual = residual;
    let curvature = dot(&x, &apply(&x));
    diag.curvature = curvature;
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Ok(unchanged(diag, StepRejection::NonPositiveCurvature));
    }
    let scale = (2.0 * config.kl_delta / curvature).sqrt();

    let mut fraction = 1.0;
    for k in 0..config.max_backtracks {
        let candidate: Vec<f64> = theta_old
            .iter()
            .zip(&x)
            .map(|(t, d)| t + fraction * scale * d)
            .collect();
        let kl = mean_kl(policy, theta_old, &candidate, &batch.states)?;
        let sur = surrogate(policy, &candidate, &old_lp, batch)?;
        if kl.is_finite() && sur.is_finite() && kl <= config.kl_delta && sur > surrogate_before {
            diag.surrogate_after = sur;
            diag.kl = kl;
            diag.backtracks = k;
            return Ok(TrpoOutcome {
                params: PolicyParams(candidate),
                diagnostics: diag,
            });
        }
        fraction *= config.backtrack_ratio;
    }
    diag.backtracks = config.max_backtracks;
    Ok(unchanged(diag, StepRejection::LineSearchFailed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_small_spd_system() {
        let a = [[4.0, 1.0], [1.0, 3.0]];
        let apply = |v: &[f64]| vec![a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
        let (x, res) = conjugate_gradient(apply, &[1.0, 2.0], 10, 1e-14);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12 && (x[1] - 7.0 / 11.0).abs() < 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn shards_cover_range_in_order() {
        let s = shards(2 * SHARD + 3);
        assert_eq!(s.len(), 3);
        assert_eq!(s[2], 2 * SHARD..2 * SHARD + 3);
        assert!(shards(0).is_empty());
    }
}
