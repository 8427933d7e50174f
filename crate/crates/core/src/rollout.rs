//! Seeded two-player rollouts.
//!
//! Trajectory `i` of a batch with root seed `r` draws its start state from
//! `seed_stream(r, 3i)`, the protagonist's noise from stream `3i + 1` and the
//! adversary's noise from stream `3i + 2`. Separate per-player streams keep the
//! protagonist's samples independent of whether (or how) the adversary samples.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{check_action_dim, Bounds, Player, Trajectory, TwoPlayerStep, ZeroSumEnv};
use crate::envs::EnvDescriptor;
use crate::error::Result;
use crate::policy::{PolicyRng, StochasticPolicy};

/// Independent ChaCha stream `stream` under root seed `root`.
pub fn seed_stream(root: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}

/// A 64-bit seed derived from `(root, tag)`.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    seed_stream(root, tag).next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from the policy distribution.
    Sample,
    /// Use the noise-free action.
    Mean,
}

/// How one player picks actions during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum Actor<'a> {
    Policy {
        policy: &'a dyn StochasticPolicy,
        params: &'a [f64],
        mode: ActionMode,
    },
    /// All-zero action of the player's dimension.
    Zero,
    /// Uniform over the player's action bounds.
    Uniform,
}

impl<'a> Actor<'a> {
    pub fn sample(policy: &'a dyn StochasticPolicy, params: &'a [f64]) -> Self {
        Actor::Policy {
            policy,
            params,
            mode: ActionMode::Sample,
        }
    }

    pub fn mean(policy: &'a dyn StochasticPolicy, params: &'a [f64]) -> Self {
        Actor::Policy {
            policy,
            params,
            mode: ActionMode::Mean,
        }
    }

    fn act(&self, state: &[f64], bounds: &[Bounds], rng: &mut PolicyRng) -> Result<Vec<f64>> {
        match *self {
            Actor::Policy {
                policy,
                params,
                mode: ActionMode::Sample,
            } => policy.sample_action(params, state, rng),
            Actor::Policy {
                policy,
                params,
                mode: ActionMode::Mean,
            } => Ok(policy.mean_action(params, state)),
            Actor::Zero => Ok(vec![0.0; bounds.len()]),
            Actor::Uniform => Ok(bounds
                .iter()
                .map(|b| if b.hi > b.lo { rng.random_range(b.lo..=b.hi) } else { b.lo })
                .collect()),
        }
    }
}

/// Play one episode to termination or the horizon. Recorded actions are the actors'
/// raw outputs; the environment clamps them.
pub fn rollout_episode(
    env: &mut dyn ZeroSumEnv,
    mu: &Actor<'_>,
    nu: &Actor<'_>,
    reset_seed: u64,
    rng_mu: &mut PolicyRng,
    rng_nu: &mut PolicyRng,
) -> Result<Trajectory> {
    let spec = env.spec().clone();
    let mut traj = Trajectory::new(spec.discount, spec.horizon);
    let mut state = env.reset(reset_seed);
    loop {
        let a1 = mu.act(&state, &spec.act1_bounds, rng_mu)?;
        let a2 = nu.act(&state, &spec.act2_bounds, rng_nu)?;
        check_action_dim(&spec, Player::Protagonist, &a1)?;
        check_action_dim(&spec, Player::Adversary, &a2)?;
        let tr = env.step(&a1, &a2)?;
        let done = tr.done();
        traj.steps.push(TwoPlayerStep {
            state,
            action1: a1,
            action2: a2,
            reward1: tr.reward1,
            reward2: tr.reward2,
            next_state: tr.next_state.clone(),
            terminal: tr.terminal,
        });
        if done {
            return Ok(traj);
        }
        state = tr.next_state;
    }
}

/// Trajectory `index` of the batch rooted at `root`, on a fresh environment instance.
pub fn rollout_indexed(env: &EnvDescriptor, mu: &Actor<'_>, nu: &Actor<'_>, root: u64, index: u64) -> Result<Trajectory> {
    let mut e = env.build()?;
    let reset_seed = derive_seed(root, 3 * index);
    let mut rng_mu = seed_stream(root, 3 * index + 1);
    let mut rng_nu = seed_stream(root, 3 * index + 2);
    rollout_episode(&mut e, mu, nu, reset_seed, &mut rng_mu, &mut rng_nu)
}

/// `n_traj` independent trajectories, generated in parallel and returned in index order.
pub fn roll(env: &EnvDescriptor, mu: &Actor<'_>, nu: &Actor<'_>, n_traj: usize, root: u64) -> Result<Vec<Trajectory>> {
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| rollout_indexed(env, mu, nu, root, i))
        .collect()
}
