use crate::env::clamp_action;
use crate::envs::{EnvDescriptor, EnvKind};
use crate::error::{check_dim, Error, Result};
use crate::policy::StochasticPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct ForceRecord {
    pub state: Vec<f64>,
    pub force: Vec<f64>,
}

/// The adversary's clamped mean action at each state.
pub fn force_field_export(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    states: &[Vec<f64>],
) -> Result<Vec<ForceRecord>> {
    let e = env.build()?;
    let spec = e.spec();
    check_dim("adversary action", spec.act2_dim, policy.act_dim())?;
    check_dim("adversary params", policy.param_count(), params.len())?;
    states
        .iter()
        .map(|s| {
            check_dim("state", spec.obs_dim, s.len())?;
            Ok(ForceRecord {
                state: s.clone(),
                force: clamp_action(&spec.act2_bounds, &policy.mean_action(params, s)),
            })
        })
        .collect()
}

/// Probe states for force-field plots.
///
/// Pendulum: a grid over pole angle and cart velocity with the cart at the origin and
/// the pole not rotating, so it covers a stationary cart with a tilted pole as well as a
/// moving cart with a vertical pole. Slider: a grid over velocity at the origin.
pub fn default_force_states(env: &EnvDescriptor) -> Result<Vec<Vec<f64>>> {
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    match env.kind() {
        EnvKind::Pendulum => Ok(lin(-0.15, 0.15, 7)
            .into_iter()
            .flat_map(|theta| lin(-1.0, 1.0, 5).into_iter().map(move |v| vec![0.0, v, theta, 0.0]))
            .collect()),
        EnvKind::Slider => Ok(lin(-1.0, 3.0, 21).into_iter().map(|v| vec![0.0, v]).collect()),
        EnvKind::Tabular => Err(Error::Unsupported {
            env: "tabular",
            what: "force field",
        }),
    }
}
