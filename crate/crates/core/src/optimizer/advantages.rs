use super::baseline::Baseline;
use crate::env::SingleAgentView;
use crate::error::{Error, Result};

/// Pooled per-timestep training data for one player.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvantageBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    /// Discounted returns-to-go (no bootstrap).
    pub returns: Vec<f64>,
}

impl AdvantageBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `A_t = sum_k (gamma lambda)^k delta_{t+k}` from per-step rewards and values.
///
/// `values` has one more entry than `rewards`: the value of the state after the last
/// step, which must be zero for terminated episodes.
pub fn gae(rewards: &[f64], values: &[f64], discount: f64, lambda: f64) -> Vec<f64> {
    debug_assert_eq!(values.len(), rewards.len() + 1);
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + discount * values[t + 1] - values[t];
        acc = delta + discount * lambda * acc;
        out[t] = acc;
    }
    out
}

/// Shift to zero mean and scale to unit (population) standard deviation in place.
/// A constant batch is only centred.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    adv.iter_mut().for_each(|a| *a -= mean);
    let std = (adv.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    if std > 1e-12 {
        adv.iter_mut().for_each(|a| *a /= std);
    }
}

/// GAE advantages before normalization.
pub fn raw_advantages(
    views: &[SingleAgentView],
    baseline: &Baseline,
    discount: f64,
    lambda: f64,
) -> Result<AdvantageBatch> {
    let mut batch = AdvantageBatch::default();
    for v in views {
        let rewards: Vec<f64> = v.rewards().collect();
        let mut values: Vec<f64> = v
            .steps
            .iter()
            .enumerate()
            .map(|(t, s)| baseline.predict(&s.state, t, v.horizon))
            .collect();
        values.push(match &v.bootstrap_state {
            Some(s) => baseline.predict(s, v.len(), v.horizon),
            None => 0.0,
        });
        batch.advantages.extend(gae(&rewards, &values, discount, lambda));
        batch.returns.extend(super::baseline::returns_to_go(&rewards, discount));
        for s in &v.steps {
            batch.states.push(s.state.clone());
            batch.actions.push(s.action.clone());
        }
    }
    if batch.is_empty() {
        return Err(Error::Empty("advantage batch"));
    }
    if batch.advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("advantages"));
    }
    Ok(batch)
}

/// GAE advantages, batch-normalized.
pub fn compute_advantages(
    views: &[SingleAgentView],
    baseline: &Baseline,
    discount: f64,
    lambda: f64,
) -> Result<AdvantageBatch> {
    let mut batch = raw_advantages(views, baseline, discount, lambda)?;
    normalize_advantages(&mut batch.advantages);
    Ok(batch)
}
