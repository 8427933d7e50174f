use nalgebra::{DMatrix, DVector};

use super::config::BaselineKind;
use crate::env::SingleAgentView;
use crate::error::{Error, Result};
use crate::policy::mlp::{MlpCache, MlpLayout};

const TIME_POWERS: usize = 3;
const INITIAL_RIDGE: f64 = 1e-10;
const MLP_HIDDEN: [usize; 2] = [32, 32];
const MLP_STEPS_PER_FIT: usize = 50;
const MLP_LEARNING_RATE: f64 = 1e-3;

/// Discounted returns-to-go `G_t = r_t + gamma G_{t+1}` with `G_T = 0`.
pub fn returns_to_go(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + discount * acc;
        *o = acc;
    }
    out
}

/// `[s, s^2, tau, tau^2, tau^3, 1]` with `tau = t / horizon`.
pub fn linear_features(state: &[f64], t: usize, horizon: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(state);
    out.extend(state.iter().map(|s| s * s));
    let tau = t as f64 / horizon.max(1) as f64;
    let mut p = 1.0;
    for _ in 0..TIME_POWERS {
        p *= tau;
        out.push(p);
    }
    out.push(1.0);
}

pub fn linear_feature_count(obs_dim: usize) -> usize {
    2 * obs_dim + TIME_POWERS + 1
}

/// Solve `min ||phi w - y||^2 + ridge ||w||^2`, escalating the ridge until the normal
/// matrix factors. Rank-deficient designs therefore always yield a solution.
pub fn ridge_least_squares(phi: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let gram = phi.tr_mul(phi);
    let rhs = phi.tr_mul(y);
    let n = gram.nrows();
    let scale = (gram.trace() / n.max(1) as f64).max(1e-300);
    let mut reg = ridge;
    loop {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += reg * scale;
        }
        if let Some(ch) = a.cholesky() {
            let w = ch.solve(&rhs);
            if w.iter().all(|v| v.is_finite()) {
                return w;
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 10.0 };
    }
}

/// State-value model used by the advantage estimator.
#[derive(Debug, Clone)]
pub enum Baseline {
    Zero,
    Linear { weights: Vec<f64> },
    Mlp(MlpBaseline),
}

impl Baseline {
    pub fn new(kind: BaselineKind, obs_dim: usize, seed: u64) -> Self {
        match kind {
            BaselineKind::LinearFeatures => Baseline::Linear {
                weights: vec![0.0; linear_feature_count(obs_dim)],
            },
            BaselineKind::Mlp => Baseline::Mlp(MlpBaseline::new(obs_dim, seed)),
        }
    }

    pub fn predict(&self, state: &[f64], t: usize, horizon: usize) -> f64 {
        match self {
            Baseline::Zero => 0.0,
            Baseline::Linear { weights } => {
                let mut f = Vec::with_capacity(weights.len());
                linear_features(state, t, horizon, &mut f);
                f.iter().zip(weights).map(|(a, b)| a * b).sum()
            }
            Baseline::Mlp(m) => m.predict(state, t, horizon),
        }
    }

    /// Refit on the discounted returns-to-go of `views`.
    pub fn fit(&mut self, views: &[SingleAgentView], discount: f64) -> Result<()> {
        let total: usize = views.iter().map(|v| v.len()).sum();
        if total == 0 {
            return Err(Error::Empty("views for baseline fit"));
        }
        match self {
            Baseline::Zero => Ok(()),
            Baseline::Linear { weights } => {
                let d = weights.len();
                let mut phi = DMatrix::zeros(total, d);
                let mut y = DVector::zeros(total);
                let mut f = Vec::with_capacity(d);
                let mut row = 0;
                for v in views {
                    let rewards: Vec<f64> = v.rewards().collect();
                    for (t, (step, g)) in v.steps.iter().zip(returns_to_go(&rewards, discount)).enumerate() {
                        linear_features(&step.state, t, v.horizon, &mut f);
                        crate::error::check_dim("baseline features", d, f.len())?;
                        for (j, x) in f.iter().enumerate() {
                            phi[(row, j)] = *x;
                        }
                        y[row] = g;
                        row += 1;
                    }
                }
                let w = ridge_least_squares(&phi, &y, INITIAL_RIDGE);
                *weights = w.iter().copied().collect();
                Ok(())
            }
            Baseline::Mlp(m) => m.fit(views, discount),
        }
    }
}

/// Least-squares linear baseline fitted in one shot.
pub fn fit_baseline(views: &[SingleAgentView], discount: f64) -> Result<Baseline> {
    let obs_dim = views
        .iter()
        .find_map(|v| v.steps.first())
        .map(|s| s.state.len())
        .ok_or(Error::Empty("views for baseline fit"))?;
    let mut b = Baseline::new(BaselineKind::LinearFeatures, obs_dim, 0);
    b.fit(views, discount)?;
    Ok(b)
}

/// Tanh network on `[state, t / horizon]` predicting standardized returns, refined by a
/// fixed number of full-batch Adam steps per fit and warm-started across fits.
#[derive(Debug, Clone)]
pub struct MlpBaseline {
    layout: MlpLayout,
    params: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
    target_mean: f64,
    target_std: f64,
}

impl MlpBaseline {
    pub fn new(obs_dim: usize, seed: u64) -> Self {
        let layout = MlpLayout::new(obs_dim + 1, MLP_HIDDEN, 1);
        let params = layout.init(seed, 1.0);
        let n = params.len();
        MlpBaseline {
            layout,
            params,
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    fn input(state: &[f64], t: usize, horizon: usize) -> Vec<f64> {
        let mut x = state.to_vec();
        x.push(t as f64 / horizon.max(1) as f64);
        x
    }

    pub fn predict(&self, state: &[f64], t: usize, horizon: usize) -> f64 {
        let mut c = MlpCache::new(&self.layout);
        self.layout.forward(&self.params, &Self::input(state, t, horizon), &mut c);
        c.out[0] * self.target_std + self.target_mean
    }

    fn fit(&mut self, views: &[SingleAgentView], discount: f64) -> Result<()> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for v in views {
            let rewards: Vec<f64> = v.rewards().collect();
            for (t, (step, g)) in v.steps.iter().zip(returns_to_go(&rewards, discount)).enumerate() {
                xs.push(Self::input(&step.state, t, v.horizon));
                ys.push(g);
            }
        }
        let n = ys.len() as f64;
        self.target_mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - self.target_mean).powi(2)).sum::<f64>() / n;
        self.target_std = var.sqrt().max(1e-8);
        for y in &mut ys {
            *y = (*y - self.target_mean) / self.target_std;
        }
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut c = MlpCache::new(&self.layout);
        let mut grad = vec![0.0; self.params.len()];
        for _ in 0..MLP_STEPS_PER_FIT {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, y) in xs.iter().zip(&ys) {
                self.layout.forward(&self.params, x, &mut c);
                let err = c.out[0] - y;
                self.layout.backward(&self.params, x, &mut c, &[err], 2.0 / n, &mut grad);
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite("baseline gradient"));
            }
            self.steps += 1;
            let bc1 = 1.0 - pow_u(b1, self.steps);
            let bc2 = 1.0 - pow_u(b2, self.steps);
            for (((p, g), m), v) in self.params.iter_mut().zip(&grad).zip(&mut self.m).zip(&mut self.v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= MLP_LEARNING_RATE * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

fn pow_u(beta: f64, t: u64) -> f64 {
    beta.powi(t.min(i32::MAX as u64) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AgentStep, Player};

    fn view(states: &[f64], rewards: &[f64], horizon: usize) -> SingleAgentView {
        SingleAgentView {
            player: Player::Protagonist,
            steps: states
                .iter()
                .zip(rewards)
                .map(|(&s, &r)| AgentStep {
                    state: vec![s],
                    action: vec![0.0],
                    reward: r,
                })
                .collect(),
            bootstrap_state: None,
            horizon,
        }
    }

    #[test]
    fn returns_to_go_matches_loop() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let g = returns_to_go(&r, 0.9);
        for t in 0..r.len() {
            let naive: f64 = (t..r.len()).map(|k| 0.9f64.powi((k - t) as i32) * r[k]).sum();
            assert!((g[t] - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_single_state_returns_are_reproduced() {
        let views: Vec<_> = (0..10).map(|_| view(&[0.3], &[2.5], 1)).collect();
        let b = fit_baseline(&views, 0.99).unwrap();
        assert!((b.predict(&[0.3], 0, 1) - 2.5).abs() < 1e-6);
    }

    #[test]
    fn rank_deficient_design_still_solves() {
        // Identical states make state and state^2 columns collinear with the constant.
        let views: Vec<_> = (0..5).map(|_| view(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 3)).collect();
        let b = fit_baseline(&views, 1.0).unwrap();
        for t in 0..3 {
            assert!((b.predict(&[1.0], t, 3) - (3 - t) as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn mlp_baseline_reduces_error() {
        let views: Vec<_> = (0..8)
            .map(|k| {
                let s: Vec<f64> = (0..20).map(|t| (t as f64 * 0.1 + k as f64 * 0.05).sin()).collect();
                view(&s, &[1.0; 20], 20)
            })
            .collect();
        let mut b = Baseline::new(BaselineKind::Mlp, 1, 3);
        let err = |b: &Baseline| -> f64 {
            views
                .iter()
                .map(|v| {
                    let g = returns_to_go(&[1.0; 20], 0.9);
                    v.steps
                        .iter()
                        .enumerate()
                        .map(|(t, s)| (b.predict(&s.state, t, 20) - g[t]).powi(2))
                        .sum::<f64>()
                })
                .sum()
        };
        b.fit(&views, 0.9).unwrap();
        let first = err(&b);
        for _ in 0..10 {
            b.fit(&views, 0.9).unwrap();
        }
        assert!(err(&b) < first);
    }
}
