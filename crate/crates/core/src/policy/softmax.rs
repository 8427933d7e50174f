use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_state, PolicyArch, PolicyParams, PolicyRng, StochasticPolicy};
use crate::envs::decode_state;
use crate::error::Result;

/// Independent softmax over discrete actions at each state of a tabular game.
///
/// Parameters are logits `theta[s * n_actions + a]`. States arrive one-hot encoded;
/// actions are a single coordinate holding the action index.
#[derive(Debug, Clone)]
pub struct SoftmaxTabularPolicy {
    n_states: usize,
    n_actions: usize,
}

impl SoftmaxTabularPolicy {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        SoftmaxTabularPolicy { n_states, n_actions }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Action probabilities at state index `s`.
    pub fn probabilities(&self, params: &[f64], s: usize) -> Vec<f64> {
        let logits = &params[s * self.n_actions..(s + 1) * self.n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    /// Full strategy table `[state][action]`.
    pub fn strategy(&self, params: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.probabilities(params, s)).collect()
    }

    /// Logits reproducing a given strategy table (zero-probability actions get a large
    /// negative logit).
    pub fn params_from_strategy(&self, strategy: &[Vec<f64>]) -> PolicyParams {
        PolicyParams(
            strategy
                .iter()
                .flat_map(|row| row.iter().map(|&p| if p > 0.0 { p.ln() } else { -60.0 }))
                .collect(),
        )
    }

    fn action_index(&self, action: &[f64]) -> usize {
        (action[0].round().max(0.0) as usize).min(self.n_actions - 1)
    }

    fn log_prob_index(&self, params: &[f64], s: usize, a: usize) -> f64 {
        let logits = &params[s * self.n_actions..(s + 1) * self.n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits[a] - lse
    }
}

impl StochasticPolicy for SoftmaxTabularPolicy {
    fn arch(&self) -> PolicyArch {
        PolicyArch::SoftmaxTabular {
            n_states: self.n_states,
            n_actions: self.n_actions,
        }
    }

    fn obs_dim(&self) -> usize {
        self.n_states
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn param_count(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Small random logits, so the initial strategy is close to uniform.
    fn init_params(&self, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolicyParams((0..self.param_count()).map(|_| rng.random_range(-0.1..0.1)).collect())
    }

    fn sample_action(&self, params: &[f64], state: &[f64], rng: &mut PolicyRng) -> Result<Vec<f64>> {
        check_state(state, self.n_states)?;
        let probs = self.probabilities(params, decode_state(state));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.n_actions - 1;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = a;
                break;
            }
        }
        Ok(vec![pick as f64])
    }

    fn mean_action(&self, params: &[f64], state: &[f64]) -> Vec<f64> {
        let probs = self.probabilities(params, decode_state(state));
        let best = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b })
            .0;
        vec![best as f64]
    }

    fn log_probs(&self, params: &[f64], states: &[Vec<f64>], actions: &[Vec<f64>]) -> Vec<f64> {
        states
            .iter()
            .zip(actions)
            .map(|(s, a)| self.log_prob_index(params, decode_state(s), self.action_index(a)))
            .collect()
    }

    fn accumulate_grad_log_prob(
        &self,
        params: &[f64],
        states: &[Vec<f64>],
        actions: &[Vec<f64>],
        weights: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(states.len());
        for ((s, a), &w) in states.iter().zip(actions).zip(weights) {
            let s = decode_state(s);
            let a = self.action_index(a);
            let probs = self.probabilities(params, s);
            let row = &mut grad[s * self.n_actions..(s + 1) * self.n_actions];
            for (k, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
                *g += w * (f64::from(u8::from(k == a)) - p);
            }
            out.push(probs[a].ln());
        }
        out
    }

    fn kl_sum(&self, old: &[f64], new: &[f64], states: &[Vec<f64>]) -> f64 {
        states
            .iter()
            .map(|s| {
                let s = decode_state(s);
                let p = self.probabilities(old, s);
                (0..self.n_actions)
                    .filter(|&a| p[a] > 0.0)
                    .map(|a| p[a] * (p[a].ln() - self.log_prob_index(new, s, a)))
                    .sum::<f64>()
            })
            .sum()
    }

    fn fisher_accumulate(&self, params: &[f64], states: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
        // Per state: (diag(p) - p p^T) v_s.
        for s in states {
            let s = decode_state(s);
            let p = self.probabilities(params, s);
            let range = s * self.n_actions..(s + 1) * self.n_actions;
            let vs = &v[range.clone()];
            let pv: f64 = p.iter().zip(vs).map(|(p, v)| p * v).sum();
            for ((o, p), v) in out[range].iter_mut().zip(&p).zip(vs) {
                *o += p * (v - pv);
            }
        }
    }
}
