//! Differentiable stochastic policies over flat parameter vectors.
//!
//! Parameters live outside the policy object: a policy describes an architecture and
//! evaluates densities, gradients and Fisher products for any [`PolicyParams`] of the
//! right length. This keeps evaluation read-only and shareable across threads.

mod checkpoint;
mod gaussian;
pub mod mlp;
mod softmax;

use std::ops::{Deref, DerefMut};

use rand_chacha::ChaCha8Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointEntry, CHECKPOINT_MAGIC};
pub use gaussian::{GaussianMlpPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use softmax::SoftmaxTabularPolicy;

use crate::error::{Error, Result};

/// Random stream a policy samples actions from.
pub type PolicyRng = ChaCha8Rng;

/// Flat parameter vector: all weights, biases, then per-dimension log standard deviations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    pub fn zeros(n: usize) -> Self {
        PolicyParams(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for PolicyParams {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for PolicyParams {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for PolicyParams {
    fn from(v: Vec<f64>) -> Self {
        PolicyParams(v)
    }
}

/// Architecture descriptor; enough to rebuild a policy from a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyArch {
    GaussianMlp {
        obs_dim: usize,
        hidden: [usize; 2],
        act_dim: usize,
    },
    SoftmaxTabular {
        n_states: usize,
        n_actions: usize,
    },
}

impl PolicyArch {
    pub fn build(&self) -> Box<dyn StochasticPolicy> {
        self.build_with_init_log_std(0.0)
    }

    pub fn build_with_init_log_std(&self, init_log_std: f64) -> Box<dyn StochasticPolicy> {
        match *self {
            PolicyArch::GaussianMlp {
                obs_dim,
                hidden,
                act_dim,
            } => Box::new(GaussianMlpPolicy::new(obs_dim, hidden, act_dim).with_init_log_std(init_log_std)),
            PolicyArch::SoftmaxTabular { n_states, n_actions } => {
                Box::new(SoftmaxTabularPolicy::new(n_states, n_actions))
            }
        }
    }
}

/// A parameterized stochastic policy `pi_theta(a | s)`.
///
/// The batch methods (`log_probs`, `accumulate_grad_log_prob`, `kl_sum`,
/// `fisher_accumulate`) take a slice of states and are what the optimizer shards across
/// threads; the single-sample helpers are conveniences built on top of them.
pub trait StochasticPolicy: Send + Sync + std::fmt::Debug {
    fn arch(&self) -> PolicyArch;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn param_count(&self) -> usize;

    fn init_params(&self, seed: u64) -> PolicyParams;

    /// Draw an action. Deterministic given the state of `rng`.
    fn sample_action(&self, params: &[f64], state: &[f64], rng: &mut PolicyRng) -> Result<Vec<f64>>;

    /// Noise-free action: the Gaussian mean, or the most probable discrete action.
    fn mean_action(&self, params: &[f64], state: &[f64]) -> Vec<f64>;

    fn log_probs(&self, params: &[f64], states: &[Vec<f64>], actions: &[Vec<f64>]) -> Vec<f64>;

    /// Add `sum_i weights[i] * grad log pi(actions[i] | states[i])` into `grad` and return
    /// the per-sample log-probabilities.
    fn accumulate_grad_log_prob(
        &self,
        params: &[f64],
        states: &[Vec<f64>],
        actions: &[Vec<f64>],
        weights: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64>;

    /// `sum_s KL(pi_old(.|s) || pi_new(.|s))`.
    fn kl_sum(&self, old: &[f64], new: &[f64], states: &[Vec<f64>]) -> f64;

    /// Add `sum_s F_s v` into `out`, where `F_s` is the Hessian of
    /// `KL(pi_params(.|s) || pi_theta(.|s))` in `theta` at `theta = params`.
    fn fisher_accumulate(&self, params: &[f64], states: &[Vec<f64>], v: &[f64], out: &mut [f64]);

    fn log_prob(&self, params: &[f64], state: &[f64], action: &[f64]) -> f64 {
        self.log_probs(params, &[state.to_vec()], &[action.to_vec()])[0]
    }

    fn grad_log_prob(&self, params: &[f64], state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.param_count()];
        self.accumulate_grad_log_prob(params, &[state.to_vec()], &[action.to_vec()], &[1.0], &mut g);
        g
    }

    /// Mean KL divergence over a non-empty batch of states.
    fn kl_divergence(&self, old: &[f64], new: &[f64], states: &[Vec<f64>]) -> Result<f64> {
        if states.is_empty() {
            return Err(Error::Empty("state batch for KL"));
        }
        Ok(self.kl_sum(old, new, states) / states.len() as f64)
    }

    /// Mean Fisher-vector product over a batch (no damping).
    fn fisher_vector_product(&self, params: &[f64], states: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.param_count()];
        self.fisher_accumulate(params, states, v, &mut out);
        let n = states.len().max(1) as f64;
        out.iter_mut().for_each(|x| *x /= n);
        out
    }
}

pub(crate) fn check_state(state: &[f64], obs_dim: usize) -> Result<()> {
    crate::error::check_dim("policy state", obs_dim, state.len())?;
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy state"));
    }
    Ok(())
}
