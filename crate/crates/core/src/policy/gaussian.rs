use rand_distr::{Distribution, StandardNormal};

use super::mlp::{MlpCache, MlpLayout};
use super::{check_state, PolicyArch, PolicyParams, PolicyRng, StochasticPolicy};
use crate::error::Result;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian policy: `a ~ N(mlp(s), diag(exp(log_std))^2)` with a
/// state-independent `log_std` stored after the network weights.
///
/// `log_std` is clamped to `[LOG_STD_MIN, LOG_STD_MAX]` wherever it is used; the clamp has
/// zero derivative outside that range.
#[derive(Debug, Clone)]
pub struct GaussianMlpPolicy {
    layout: MlpLayout,
    init_log_std: f64,
}

impl GaussianMlpPolicy {
    pub fn new(obs_dim: usize, hidden: [usize; 2], act_dim: usize) -> Self {
        GaussianMlpPolicy {
            layout: MlpLayout::new(obs_dim, hidden, act_dim),
            init_log_std: 0.0,
        }
    }

    /// The default 64-64 architecture.
    pub fn standard(obs_dim: usize, act_dim: usize) -> Self {
        Self::new(obs_dim, [64, 64], act_dim)
    }

    pub fn with_init_log_std(mut self, log_std: f64) -> Self {
        self.init_log_std = log_std;
        self
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    /// Offset of the first `log_std` entry in the flat parameter vector.
    pub fn log_std_offset(&self) -> usize {
        self.layout.len()
    }

    fn log_std<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.layout.len()..]
    }

    fn cache(&self) -> MlpCache {
        MlpCache::new(&self.layout)
    }

    pub fn mean(&self, params: &[f64], state: &[f64]) -> Vec<f64> {
        let mut c = self.cache();
        self.layout.forward(params, state, &mut c);
        c.out
    }
}

fn clamp_log_std(x: f64) -> f64 {
    x.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

fn log_std_active(x: f64) -> bool {
    (LOG_STD_MIN..=LOG_STD_MAX).contains(&x)
}

impl StochasticPolicy for GaussianMlpPolicy {
    fn arch(&self) -> PolicyArch {
        PolicyArch::GaussianMlp {
            obs_dim: self.layout.n_in,
            hidden: [self.layout.h1, self.layout.h2],
            act_dim: self.layout.n_out,
        }
    }

    fn obs_dim(&self) -> usize {
        self.layout.n_in
    }

    fn act_dim(&self) -> usize {
        self.layout.n_out
    }

    fn param_count(&self) -> usize {
        self.layout.len() + self.layout.n_out
    }

    fn init_params(&self, seed: u64) -> PolicyParams {
        let mut p = self.layout.init(seed, 0.01);
        p.extend(std::iter::repeat_n(self.init_log_std, self.layout.n_out));
        PolicyParams(p)
    }

    fn sample_action(&self, params: &[f64], state: &[f64], rng: &mut PolicyRng) -> Result<Vec<f64>> {
        check_state(state, self.obs_dim())?;
        let mut a = self.mean(params, state);
        for (a, &ls) in a.iter_mut().zip(self.log_std(params)) {
            let z: f64 = StandardNormal.sample(rng);
            *a += clamp_log_std(ls).exp() * z;
        }
        Ok(a)
    }

    fn mean_action(&self, params: &[f64], state: &[f64]) -> Vec<f64> {
        self.mean(params, state)
    }

    fn log_probs(&self, params: &[f64], states: &[Vec<f64>], actions: &[Vec<f64>]) -> Vec<f64> {
        let log_std: Vec<f64> = self.log_std(params).iter().map(|&x| clamp_log_std(x)).collect();
        let inv_var: Vec<f64> = log_std.iter().map(|&l| (-2.0 * l).exp()).collect();
        let norm: f64 = log_std.iter().map(|l| l + HALF_LOG_2PI).sum();
        let mut c = self.cache();
        states
            .iter()
            .zip(actions)
            .map(|(s, a)| {
                self.layout.forward(params, s, &mut c);
                let quad: f64 = c
                    .out
                    .iter()
                    .zip(a)
                    .zip(&inv_var)
                    .map(|((m, a), iv)| (a - m) * (a - m) * iv)
                    .sum();
                -0.5 * quad - norm
            })
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
        let raw_log_std = self.log_std(params);
        let log_std: Vec<f64> = raw_log_std.iter().map(|&x| clamp_log_std(x)).collect();
        let inv_var: Vec<f64> = log_std.iter().map(|&l| (-2.0 * l).exp()).collect();
        let norm: f64 = log_std.iter().map(|l| l + HALF_LOG_2PI).sum();
        let act = self.act_dim();
        let off = self.log_std_offset();
        let mut c = self.cache();
        let mut g_mean = vec![0.0; act];
        let mut out = Vec::with_capacity(states.len());
        for ((s, a), &w) in states.iter().zip(actions).zip(weights) {
            self.layout.forward(params, s, &mut c);
            let mut quad = 0.0;
            for d in 0..act {
                let diff = a[d] - c.out[d];
                let z2 = diff * diff * inv_var[d];
                quad += z2;
                g_mean[d] = diff * inv_var[d];
                if log_std_active(raw_log_std[d]) {
                    grad[off + d] += w * (z2 - 1.0);
                }
            }
            out.push(-0.5 * quad - norm);
            if w != 0.0 {
                self.layout.backward(params, s, &mut c, &g_mean, w, grad);
            }
        }
        out
    }

    fn kl_sum(&self, old: &[f64], new: &[f64], states: &[Vec<f64>]) -> f64 {
        let ls_old: Vec<f64> = self.log_std(old).iter().map(|&x| clamp_log_std(x)).collect();
        let ls_new: Vec<f64> = self.log_std(new).iter().map(|&x| clamp_log_std(x)).collect();
        // Per-dimension constant part: log(s_new/s_old) + s_old^2 / (2 s_new^2) - 1/2.
        let constant: f64 = ls_old
            .iter()
            .zip(&ls_new)
            .map(|(o, n)| n - o + 0.5 * (2.0 * (o - n)).exp() - 0.5)
            .sum();
        let inv_2var_new: Vec<f64> = ls_new.iter().map(|&n| 0.5 * (-2.0 * n).exp()).collect();
        let mut c_old = self.cache();
        let mut c_new = self.cache();
        let mut total = 0.0;
        for s in states {
            self.layout.forward(old, s, &mut c_old);
            self.layout.forward(new, s, &mut c_new);
            let quad: f64 = c_old
                .out
                .iter()
                .zip(&c_new.out)
                .zip(&inv_2var_new)
                .map(|((a, b), k)| (a - b) * (a - b) * k)
                .sum();
            total += constant + quad;
        }
        total
    }

    fn fisher_accumulate(&self, params: &[f64], states: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
        let raw_log_std = self.log_std(params);
        let inv_var: Vec<f64> = raw_log_std.iter().map(|&l| (-2.0 * clamp_log_std(l)).exp()).collect();
        let act = self.act_dim();
        let off = self.log_std_offset();
        let mut c = self.cache();
        let mut jv = vec![0.0; act];
        for s in states {
            self.layout.forward(params, s, &mut c);
            self.layout.jvp(params, s, &mut c, v, &mut jv);
            for (j, iv) in jv.iter_mut().zip(&inv_var) {
                *j *= iv;
            }
            self.layout.backward(params, s, &mut c, &jv, 1.0, out);
        }
        // The log_std block of the Gaussian Fisher is 2 I, independent of the state.
        let n = states.len() as f64;
        for d in 0..act {
            if log_std_active(raw_log_std[d]) {
                out[off + d] += 2.0 * n * v[off + d];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn policy() -> GaussianMlpPolicy {
        GaussianMlpPolicy::new(3, [8, 6], 2)
    }

    #[test]
    fn standard_normal_log_prob_at_mean() {
        let p = GaussianMlpPolicy::new(2, [4, 4], 1);
        let params = p.init_params(0);
        let s = [0.2, -0.1];
        let m = p.mean(&params, &s);
        assert!((p.log_prob(&params, &s, &m) + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn log_std_gradient_is_minus_one_at_mean() {
        let p = policy();
        let params = p.init_params(4);
        let s = [0.5, 0.1, -0.3];
        let m = p.mean(&params, &s);
        let g = p.grad_log_prob(&params, &s, &m);
        for d in 0..2 {
            assert!((g[p.log_std_offset() + d] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_zero_weights_kill_first_layer_gradient() {
        let p = policy();
        let params = PolicyParams::zeros(p.param_count());
        let g = p.grad_log_prob(&params, &[0.0; 3], &[0.4, -0.2]);
        let l = p.layout();
        assert!(g[l.w1()..l.b1()].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identical_params_have_zero_kl() {
        let p = policy();
        let params = p.init_params(2);
        let states = vec![vec![0.1, 0.2, 0.3], vec![-1.0, 0.0, 2.0]];
        assert_eq!(p.kl_divergence(&params, &params, &states).unwrap(), 0.0);
    }

    #[test]
    fn shifted_mean_kl_is_half_delta_squared() {
        let p = GaussianMlpPolicy::new(1, [2, 2], 1);
        let old = p.init_params(0);
        let mut new = old.clone();
        let delta = 0.3;
        new[p.layout().b3()] += delta;
        let kl = p.kl_divergence(&old, &new, &[vec![0.7]]).unwrap();
        assert!((kl - delta * delta / 2.0).abs() < 1e-14);
    }

    #[test]
    fn clamped_log_std_sampling_is_near_deterministic() {
        let p = GaussianMlpPolicy::new(2, [4, 4], 2).with_init_log_std(-1e9);
        let params = p.init_params(1);
        let s = [0.3, 0.3];
        let m = p.mean(&params, &s);
        let mut rng = PolicyRng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = p.sample_action(&params, &s, &mut rng).unwrap();
            for (a, m) in a.iter().zip(&m) {
                assert!((a - m).abs() <= 6.0 * (-5.0f64).exp());
            }
        }
    }

    #[test]
    fn non_finite_state_rejected() {
        let p = policy();
        let params = p.init_params(0);
        let mut rng = PolicyRng::seed_from_u64(0);
        assert!(p.sample_action(&params, &[f64::NAN, 0.0, 0.0], &mut rng).is_err());
        assert!(p.sample_action(&params, &[0.0, 0.0], &mut rng).is_err());
    }
}
