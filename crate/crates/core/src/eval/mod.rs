//! Evaluation of trained protagonists: clean and attacked returns, percentile curves over
//! training seeds, physics sweeps and adversary force fields.
//!
//! Episode `i` of an evaluation rooted at `seed_base` uses the same seed streams as
//! trajectory `i` of a training batch, so any two evaluations sharing `seed_base` see
//! identical start states.

mod csv;
mod force;
mod plot;
mod sweep;

use rayon::prelude::*;

pub use csv::{
    parse_difference_csv, parse_force_csv, parse_percentile_csv, parse_sweep_csv, write_difference_csv,
    write_force_csv, write_percentile_csv, write_sweep_csv, DifferenceRow, SweepRow,
};
pub use force::{default_force_states, force_field_export, ForceRecord};
pub use plot::{force_plot_script, heatmap_plot_script, percentile_plot_script, sweep_plot_script};
pub use sweep::{
    default_grid, difference_grid, friction_sweep, joint_sweep, mass_sweep, Axis, SweepCell, SweepGrid,
};

use crate::envs::EnvDescriptor;
use crate::error::{invalid, Error, Result};
use crate::oracle::{cvar, lower_rank, RiskStats};
use crate::policy::StochasticPolicy;
use crate::rollout::{rollout_indexed, Actor};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_EPISODES: usize = 100;

/// Who plays the adversary during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum EvalAdversary<'a> {
    /// Zero adversary action.
    None,
    /// Uniform within the adversary's force cap.
    Random,
    /// A trained adversary, acting on its mean.
    Policy {
        policy: &'a dyn StochasticPolicy,
        params: &'a [f64],
    },
}

impl EvalAdversary<'_> {
    fn actor(&self) -> Actor<'_> {
        match *self {
            EvalAdversary::None => Actor::Zero,
            EvalAdversary::Random => Actor::Uniform,
            EvalAdversary::Policy { policy, params } => Actor::mean(policy, params),
        }
    }
}

/// Summary of protagonist returns over a set of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub episodes: usize,
    pub returns: Vec<f64>,
    pub risk: RiskStats,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>, alpha: f64) -> Result<Self> {
        let risk = cvar(&returns, alpha)?;
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Ok(EvalStats {
            mean,
            std: var.sqrt(),
            episodes: returns.len(),
            returns,
            risk,
        })
    }
}

/// Undiscounted protagonist return of `n_episodes` episodes with the protagonist acting
/// on its mean.
pub fn evaluate(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    n_episodes: usize,
    adversary: EvalAdversary<'_>,
    seed_base: u64,
    alpha: f64,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(invalid("n_episodes", "must be at least 1"));
    }
    let mu = Actor::mean(policy, params);
    let nu = adversary.actor();
    let returns = (0..n_episodes as u64)
        .into_par_iter()
        .map(|i| rollout_indexed(env, &mu, &nu, seed_base, i).map(|t| t.total_reward1()))
        .collect::<Result<Vec<f64>>>()?;
    EvalStats::from_returns(returns, alpha)
}

/// Lower-interpolated value at each integer percentile `0..=100` of `rewards`.
pub fn percentile_curve(rewards: &[f64]) -> Result<Vec<(u32, f64)>> {
    if rewards.len() < 2 {
        return Err(invalid("rewards", "need at least two seeds"));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rewards"));
    }
    let mut s = rewards.to_vec();
    s.sort_by(f64::total_cmp);
    Ok((0..=100u32)
        .map(|p| (p, s[lower_rank(f64::from(p) / 100.0, s.len()) - 1]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_lower_interpolation() {
        let c = percentile_curve(&[40.0, 10.0, 30.0, 20.0]).unwrap();
        assert_eq!(c.len(), 101);
        assert_eq!(c[50], (50, 20.0));
        assert_eq!(c[0].1, 10.0);
        assert_eq!(c[100].1, 40.0);
        assert!(c.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn flat_curve_for_equal_rewards() {
        let c = percentile_curve(&[3.0; 7]).unwrap();
        assert!(c.iter().all(|&(_, r)| r == 3.0));
        assert!(percentile_curve(&[1.0]).is_err());
    }

    #[test]
    fn stats_from_returns() {
        let s = EvalStats::from_returns(vec![1.0, 2.0, 3.0, 4.0], 0.5).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.risk.cvar, 1.5);
    }
}
