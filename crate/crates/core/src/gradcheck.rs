//! Finite-difference checks of the analytic policy derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::optimizer::{surrogate, surrogate_and_gradient, AdvantageBatch};
use crate::policy::{GaussianMlpPolicy, SoftmaxTabularPolicy, StochasticPolicy};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const FVP_TOLERANCE: f64 = 1e-3;
const GRAD_PROBES: usize = 100;
const FVP_PROBES: usize = 20;
const FVP_DIRECTIONS: usize = 4;
const H_GRAD: f64 = 1e-5;
const H_FVP: f64 = 1e-3;

/// Which analytic quantity to corrupt, so callers can check that a broken derivative is
/// caught.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    GradLogProb,
    SurrogateGradient,
    FisherVectorProduct,
}

impl std::str::FromStr for Perturbation {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad_log_prob" => Ok(Perturbation::GradLogProb),
            "surrogate_gradient" => Ok(Perturbation::SurrogateGradient),
            "fisher_vector_product" => Ok(Perturbation::FisherVectorProduct),
            other => Err(invalid("perturb", format!("unknown operation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: &'static str,
    pub probes: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + H_GRAD;
            let up = f(&xp);
            xp[i] = x[i] - H_GRAD;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * H_GRAD)
        })
        .collect()
}

fn corrupt(v: &mut [f64], on: bool) {
    if on {
        if let Some(x) = v.first_mut() {
            *x = *x * 1.01 + 1e-3;
        }
    }
}

fn policies() -> Vec<Box<dyn StochasticPolicy>> {
    vec![
        Box::new(GaussianMlpPolicy::new(3, [8, 8], 2).with_init_log_std(-0.3)),
        Box::new(SoftmaxTabularPolicy::new(4, 3)),
    ]
}

fn random_params(policy: &dyn StochasticPolicy, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = policy.init_params(rng.random());
    let noise = normal_vec(rng, base.len(), 0.3);
    base.iter().zip(noise).map(|(b, n)| b + n).collect()
}

fn random_state(policy: &dyn StochasticPolicy, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match policy.arch() {
        crate::policy::PolicyArch::SoftmaxTabular { n_states, .. } => {
            let mut s = vec![0.0; n_states];
            s[rng.random_range(0..n_states)] = 1.0;
            s
        }
        _ => normal_vec(rng, policy.obs_dim(), 1.0),
    }
}

fn random_action(policy: &dyn StochasticPolicy, params: &[f64], state: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    policy.sample_action(params, state, rng)
}

fn check_grad_log_prob(policy: &dyn StochasticPolicy, rng: &mut ChaCha8Rng, perturb: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_PROBES {
        let params = random_params(policy, rng);
        let state = random_state(policy, rng);
        let action = random_action(policy, &params, &state, rng)?;
        let mut g = policy.grad_log_prob(&params, &state, &action);
        corrupt(&mut g, perturb);
        let fd = central_gradient(|p| policy.log_prob(p, &state, &action), &params);
        worst = worst.max(rel_error(&g, &fd));
    }
    Ok(worst)
}

fn random_batch(policy: &dyn StochasticPolicy, params: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<AdvantageBatch> {
    let mut batch = AdvantageBatch::default();
    for _ in 0..n {
        let s = random_state(policy, rng);
        let a = random_action(policy, params, &s, rng)?;
        batch.states.push(s);
        batch.actions.push(a);
        batch.advantages.push(rng.sample(StandardNormal));
        batch.returns.push(0.0);
    }
    Ok(batch)
}

fn check_surrogate(policy: &dyn StochasticPolicy, rng: &mut ChaCha8Rng, perturb: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_PROBES {
        let old = random_params(policy, rng);
        let batch = random_batch(policy, &old, 16, rng)?;
        let theta: Vec<f64> = old.iter().zip(normal_vec(rng, old.len(), 0.05)).map(|(a, b)| a + b).collect();
        let old_lp = policy.log_probs(&old, &batch.states, &batch.actions);
        let (_, mut g) = surrogate_and_gradient(policy, &old, &theta, &batch)?;
        corrupt(&mut g, perturb);
        let fd = central_gradient(|p| surrogate(policy, p, &old_lp, &batch).unwrap_or(f64::NAN), &theta);
        worst = worst.max(rel_error(&g, &fd));
    }
    Ok(worst)
}

/// `u . F v` from second differences of the KL:
/// `KL(h w) + KL(-h w) ~ h^2 w.F w`, so the difference at `w = u + v` and `w = u - v`
/// is `4 h^2 u.F v` with odd-order terms cancelled.
fn check_fvp(policy: &dyn StochasticPolicy, rng: &mut ChaCha8Rng, perturb: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..FVP_PROBES {
        let params = random_params(policy, rng);
        let states: Vec<Vec<f64>> = (0..8).map(|_| random_state(policy, rng)).collect();
        let n = params.len();
        let v = normal_vec(rng, n, 1.0);
        let mut fv = policy.fisher_vector_product(&params, &states, &v);
        corrupt(&mut fv, perturb);
        let kl = |w: &[f64], sign: f64| {
            let p: Vec<f64> = params.iter().zip(w).map(|(a, b)| a + sign * H_FVP * b).collect();
            policy.kl_sum(&params, &p, &states) / states.len() as f64
        };
        let mut analytic = Vec::with_capacity(FVP_DIRECTIONS + 1);
        let mut numeric = Vec::with_capacity(FVP_DIRECTIONS + 1);
        let mut dirs: Vec<Vec<f64>> = (0..FVP_DIRECTIONS).map(|_| normal_vec(rng, n, 1.0)).collect();
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        dirs.push(e0);
        for u in dirs {
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let fd = (kl(&plus, 1.0) + kl(&plus, -1.0) - kl(&minus, 1.0) - kl(&minus, -1.0)) / (4.0 * H_FVP * H_FVP);
            analytic.push(u.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>());
            numeric.push(fd);
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    Ok(worst)
}

/// Run every probe on a small Gaussian MLP and a tabular softmax policy.
pub fn gradcheck(seed: u64, perturb: Option<Perturbation>) -> Result<Vec<ProbeReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    let names = [
        ("gaussian grad_log_prob", "softmax grad_log_prob"),
        ("gaussian surrogate_gradient", "softmax surrogate_gradient"),
        ("gaussian fisher_vector_product", "softmax fisher_vector_product"),
    ];
    for (k, policy) in policies().iter().enumerate() {
        let pick = |pair: (&'static str, &'static str)| if k == 0 { pair.0 } else { pair.1 };
        let p = policy.as_ref();
        reports.push(ProbeReport {
            name: pick(names[0]),
            probes: GRAD_PROBES,
            max_rel_error: check_grad_log_prob(p, &mut rng, perturb == Some(Perturbation::GradLogProb))?,
            tolerance: GRAD_TOLERANCE,
        });
        reports.push(ProbeReport {
            name: pick(names[1]),
            probes: GRAD_PROBES,
            max_rel_error: check_surrogate(p, &mut rng, perturb == Some(Perturbation::SurrogateGradient))?,
            tolerance: GRAD_TOLERANCE,
        });
        reports.push(ProbeReport {
            name: pick(names[2]),
            probes: FVP_PROBES,
            max_rel_error: check_fvp(p, &mut rng, perturb == Some(Perturbation::FisherVectorProduct))?,
            tolerance: FVP_TOLERANCE,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_probes_pass_and_perturbed_ones_fail() {
        let clean = gradcheck(5, None).unwrap();
        for r in &clean {
            assert!(r.passed(), "{} {}", r.name, r.max_rel_error);
        }
        let bad = gradcheck(5, Some(Perturbation::FisherVectorProduct)).unwrap();
        assert!(bad.iter().any(|r| !r.passed() && r.name.ends_with("fisher_vector_product")));
        assert!(bad.iter().filter(|r| !r.name.ends_with("fisher_vector_product")).all(|r| r.passed()));
    }
}
