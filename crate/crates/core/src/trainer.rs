//! Alternating protagonist/adversary optimization.
//!
//! Each outer iteration first holds the adversary fixed and runs `n_mu` rounds of
//! {roll, split for the protagonist, trust-region step}, then holds the protagonist
//! fixed and runs `n_nu` rounds for the adversary. Every round rolls a fresh batch.

use crate::env::{split, Player, Trajectory};
use crate::envs::{EnvDescriptor, EnvKind};
use crate::error::{invalid, Error, Result};
use crate::optimizer::{compute_advantages, trpo_step, Baseline, OptimizerConfig, StepDiagnostics};
use crate::policy::{Checkpoint, CheckpointEntry, PolicyArch, PolicyParams, StochasticPolicy};
pub use crate::rollout::{derive_seed, roll, seed_stream, ActionMode, Actor};

const TAG_INIT_MU: u64 = 1;
const TAG_INIT_NU: u64 = 2;
const TAG_BASELINE_MU: u64 = 3;
const TAG_BASELINE_NU: u64 = 4;
const TAG_ROLLS: u64 = 1 << 8;
const TAG_ATTACK: u64 = 1 << 9;

pub const PHYSICS_KL_DELTA: f64 = 0.02;
pub const PHYSICS_FISHER_SUBSAMPLE: usize = 5;

/// Everything that determines a training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub env: EnvDescriptor,
    pub n_iter: usize,
    pub n_mu: usize,
    pub n_nu: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub protagonist: OptimizerConfig,
    pub adversary: OptimizerConfig,
    /// Train against a zero-strength adversary and never update it.
    pub baseline_mode: bool,
    /// Hidden layer sizes of both Gaussian policies.
    pub hidden: [usize; 2],
    /// Initial Gaussian standard deviation as a fraction of each player's force cap.
    pub init_std_fraction: f64,
    /// Emit a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn new(env: EnvDescriptor) -> Self {
        TrainConfig {
            env,
            n_iter: 100,
            n_mu: 1,
            n_nu: 1,
            n_traj: 32,
            seed: 0,
            protagonist: OptimizerConfig::default(),
            adversary: OptimizerConfig::default(),
            baseline_mode: false,
            hidden: [64, 64],
            init_std_fraction: 0.5,
            checkpoint_every: 0,
        }
    }

    /// Per-environment defaults: 100 iterations on the pendulum, 500 on the slider and
    /// 2000 on tabular games. Physics environments use a wider trust region and a
    /// subsampled Fisher.
    pub fn for_env(env: EnvDescriptor) -> Self {
        let (n_iter, physics) = match env.kind() {
            EnvKind::Pendulum => (100, true),
            EnvKind::Slider => (500, true),
            EnvKind::Tabular => (2000, false),
        };
        let opt = if physics {
            OptimizerConfig {
                kl_delta: PHYSICS_KL_DELTA,
                fisher_subsample: PHYSICS_FISHER_SUBSAMPLE,
                ..OptimizerConfig::default()
            }
        } else {
            OptimizerConfig::default()
        };
        TrainConfig {
            n_iter,
            protagonist: opt,
            adversary: opt,
            ..TrainConfig::new(env)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mu == 0 || self.n_nu == 0 || self.n_traj == 0 {
            return Err(invalid("train", "n_mu, n_nu and n_traj must be at least 1"));
        }
        if !(self.init_std_fraction > 0.0 && self.init_std_fraction.is_finite()) {
            return Err(invalid("init_std_fraction", "must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden", "layer sizes must be positive"));
        }
        self.protagonist.validate()?;
        self.adversary.validate()?;
        if let Some(p) = self.env.physics() {
            p.validate()?;
        }
        Ok(())
    }

    /// The environment actually rolled out: the configured one, or its zero-strength
    /// version in baseline mode.
    pub fn effective_env(&self) -> EnvDescriptor {
        if self.baseline_mode {
            self.env.without_adversary()
        } else {
            self.env.clone()
        }
    }

    pub fn arch(&self, player: Player) -> Result<PolicyArch> {
        policy_arch(&self.env, player, self.hidden)
    }

    /// Initial `log_std` for a player's Gaussian policy: `init_std_fraction` times the
    /// half-width of its action bounds in the configured (not zero-strength) environment.
    pub fn init_log_std(&self, player: Player) -> Result<f64> {
        let spec = self.env.build()?.spec().clone();
        let half = spec
            .bounds(player)
            .iter()
            .map(|b| 0.5 * (b.hi - b.lo))
            .fold(0.0, f64::max);
        Ok(if half > 0.0 {
            (self.init_std_fraction * half).ln()
        } else {
            0.0
        })
    }

    pub fn build_policies(&self) -> Result<(Box<dyn StochasticPolicy>, Box<dyn StochasticPolicy>)> {
        Ok((
            self.arch(Player::Protagonist)?.build_with_init_log_std(self.init_log_std(Player::Protagonist)?),
            self.arch(Player::Adversary)?.build_with_init_log_std(self.init_log_std(Player::Adversary)?),
        ))
    }

    /// Seeded initial parameters, with distinct sub-seeds per player.
    pub fn initial_params(&self) -> Result<(PolicyParams, PolicyParams)> {
        let (mu, nu) = self.build_policies()?;
        Ok((
            mu.init_params(derive_seed(self.seed, TAG_INIT_MU)),
            nu.init_params(derive_seed(self.seed, TAG_INIT_NU)),
        ))
    }

    fn baselines(&self) -> Result<(Baseline, Baseline)> {
        let spec = self.env.build()?.spec().clone();
        Ok((
            Baseline::new(self.protagonist.baseline, spec.obs_dim, derive_seed(self.seed, TAG_BASELINE_MU)),
            Baseline::new(self.adversary.baseline, spec.obs_dim, derive_seed(self.seed, TAG_BASELINE_NU)),
        ))
    }
}

/// Policy architecture for one player of an environment.
pub fn policy_arch(env: &EnvDescriptor, player: Player, hidden: [usize; 2]) -> Result<PolicyArch> {
    Ok(match env {
        EnvDescriptor::Tabular { game, .. } => PolicyArch::SoftmaxTabular {
            n_states: game.n_states,
            n_actions: match player {
                Player::Protagonist => game.n_actions1,
                Player::Adversary => game.n_actions2,
            },
        },
        _ => {
            let spec = env.build()?.spec().clone();
            PolicyArch::GaussianMlp {
                obs_dim: spec.obs_dim,
                hidden,
                act_dim: spec.act_dim(player),
            }
        }
    })
}

/// Root seed of the batch rolled in `(iteration, phase, inner round)`.
pub fn roll_root(seed: u64, iteration: usize, player: Player, inner: usize) -> u64 {
    let event = ((iteration as u64) << 21) | ((player.index() as u64) << 20) | inner as u64;
    derive_seed(seed, TAG_ROLLS + event)
}

/// Statistics of one policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub iteration: usize,
    pub player: Player,
    pub inner: usize,
    /// Mean undiscounted protagonist return of the batch.
    pub mean_return1: f64,
    /// Mean undiscounted adversary return of the same batch.
    pub mean_return2: f64,
    pub mean_length: f64,
    pub diagnostics: StepDiagnostics,
}

/// A rollout-plus-update event, for checking the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub iteration: usize,
    pub player: Player,
    pub inner: usize,
    pub rollouts: usize,
}

/// Hooks invoked during training. All methods default to doing nothing.
pub trait TrainObserver {
    fn on_event(&mut self, _event: &ScheduleEvent) {}
    fn on_update(&mut self, _stats: &UpdateStats) {}
    /// Parameters after iteration `iteration` completed both phases.
    fn on_iteration(&mut self, _iteration: usize, _theta_mu: &PolicyParams, _theta_nu: &PolicyParams) {}
    /// Persist a checkpoint; an error aborts training with a resumable state.
    fn on_checkpoint(&mut self, _checkpoint: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
#[derive(Debug, Default)]
pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Enough state to continue a run exactly where it stopped.
#[derive(Debug, Clone)]
pub struct ResumeState {
    /// First iteration still to run.
    pub next_iteration: usize,
    pub theta_mu: PolicyParams,
    pub theta_nu: PolicyParams,
    pub history: Vec<UpdateStats>,
    pub baseline_mu: Baseline,
    pub baseline_nu: Baseline,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub theta_mu: PolicyParams,
    pub theta_nu: PolicyParams,
    pub history: Vec<UpdateStats>,
    /// Iterations at which checkpoints were emitted.
    pub checkpoints: Vec<usize>,
}

impl TrainResult {
    pub fn checkpoint(&self, config: &TrainConfig, iteration: usize) -> Result<Checkpoint> {
        make_checkpoint(config, iteration, &self.theta_mu, &self.theta_nu)
    }
}

fn make_checkpoint(config: &TrainConfig, iteration: usize, mu: &PolicyParams, nu: &PolicyParams) -> Result<Checkpoint> {
    Ok(Checkpoint {
        seed: config.seed,
        iteration: iteration as u64,
        policies: vec![
            CheckpointEntry {
                arch: config.arch(Player::Protagonist)?,
                params: mu.clone(),
            },
            CheckpointEntry {
                arch: config.arch(Player::Adversary)?,
                params: nu.clone(),
            },
        ],
    })
}

/// Mean undiscounted returns of both players. The adversary's total is accumulated in
/// the same order from negated rewards, so it is the exact negation of the protagonist's.
pub fn batch_returns(trajs: &[Trajectory]) -> (f64, f64, f64) {
    let n = trajs.len() as f64;
    let r1: f64 = trajs.iter().map(|t| t.steps.iter().map(|s| s.reward1).sum::<f64>()).sum();
    let r2: f64 = trajs.iter().map(|t| t.steps.iter().map(|s| s.reward2).sum::<f64>()).sum();
    let len: usize = trajs.iter().map(|t| t.len()).sum();
    (r1 / n, r2 / n, len as f64 / n)
}

/// Split a batch for `player`, refit its baseline, and take one trust-region step.
pub fn update_player(
    policy: &dyn StochasticPolicy,
    theta: &PolicyParams,
    trajs: &[Trajectory],
    player: Player,
    baseline: &mut Baseline,
    config: &OptimizerConfig,
) -> Result<crate::optimizer::TrpoOutcome> {
    let views = trajs.iter().map(|t| split(t, player)).collect::<Result<Vec<_>>>()?;
    let discount = trajs.first().map_or(1.0, |t| t.discount);
    baseline.fit(&views, discount)?;
    let batch = compute_advantages(&views, baseline, discount, config.gae_lambda)?;
    trpo_step(policy, theta, &batch, config)
}

/// Run the full alternating schedule from the seeded initialization.
pub fn train(config: &TrainConfig) -> Result<TrainResult> {
    train_with(config, &mut NoObserver, None)
}

/// Run the alternating schedule with hooks, optionally resuming a stopped run.
pub fn train_with(
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
    resume: Option<ResumeState>,
) -> Result<TrainResult> {
    config.validate()?;
    let env = config.effective_env();
    let (policy_mu, policy_nu) = config.build_policies()?;
    let mut state = match resume {
        Some(r) => r,
        None => {
            let (theta_mu, theta_nu) = config.initial_params()?;
            let (baseline_mu, baseline_nu) = config.baselines()?;
            ResumeState {
                next_iteration: 0,
                theta_mu,
                theta_nu,
                history: Vec::new(),
                baseline_mu,
                baseline_nu,
            }
        }
    };
    let mut checkpoints = Vec::new();
    if config.n_iter == 0 {
        let ckpt = make_checkpoint(config, 0, &state.theta_mu, &state.theta_nu)?;
        observer.on_checkpoint(&ckpt)?;
        checkpoints.push(0);
    }

    for i in state.next_iteration..config.n_iter {
        for j in 0..config.n_mu {
            observer.on_event(&ScheduleEvent {
                iteration: i,
                player: Player::Protagonist,
                inner: j,
                rollouts: config.n_traj,
            });
            let mu = Actor::sample(policy_mu.as_ref(), &state.theta_mu);
            let nu = if config.baseline_mode {
                Actor::Zero
            } else {
                Actor::sample(policy_nu.as_ref(), &state.theta_nu)
            };
            let trajs = roll(&env, &mu, &nu, config.n_traj, roll_root(config.seed, i, Player::Protagonist, j))?;
            let out = update_player(
                policy_mu.as_ref(),
                &state.theta_mu,
                &trajs,
                Player::Protagonist,
                &mut state.baseline_mu,
                &config.protagonist,
            )?;
            let stats = stats_for(i, Player::Protagonist, j, &trajs, out.diagnostics);
            observer.on_update(&stats);
            state.history.push(stats);
            state.theta_mu = out.params;
        }
        if !config.baseline_mode {
            for j in 0..config.n_nu {
                observer.on_event(&ScheduleEvent {
                    iteration: i,
                    player: Player::Adversary,
                    inner: j,
                    rollouts: config.n_traj,
                });
                let mu = Actor::sample(policy_mu.as_ref(), &state.theta_mu);
                let nu = Actor::sample(policy_nu.as_ref(), &state.theta_nu);
                let trajs = roll(&env, &mu, &nu, config.n_traj, roll_root(config.seed, i, Player::Adversary, j))?;
                let out = update_player(
                    policy_nu.as_ref(),
                    &state.theta_nu,
                    &trajs,
                    Player::Adversary,
                    &mut state.baseline_nu,
                    &config.adversary,
                )?;
                let stats = stats_for(i, Player::Adversary, j, &trajs, out.diagnostics);
                observer.on_update(&stats);
                state.history.push(stats);
                state.theta_nu = out.params;
            }
        }
        state.next_iteration = i + 1;
        observer.on_iteration(i, &state.theta_mu, &state.theta_nu);
        let due = i + 1 == config.n_iter || (config.checkpoint_every > 0 && (i + 1) % config.checkpoint_every == 0);
        if due {
            let ckpt = make_checkpoint(config, i + 1, &state.theta_mu, &state.theta_nu)?;
            if let Err(e) = observer.on_checkpoint(&ckpt) {
                return Err(Error::TrainAborted {
                    completed: i + 1,
                    source: Box::new(e),
                    resume: Box::new(state),
                });
            }
            checkpoints.push(i + 1);
        }
    }
    Ok(TrainResult {
        theta_mu: state.theta_mu,
        theta_nu: state.theta_nu,
        history: state.history,
        checkpoints,
    })
}

fn stats_for(iteration: usize, player: Player, inner: usize, trajs: &[Trajectory], d: StepDiagnostics) -> UpdateStats {
    let (mean_return1, mean_return2, mean_length) = batch_returns(trajs);
    UpdateStats {
        iteration,
        player,
        inner,
        mean_return1,
        mean_return2,
        mean_length,
        diagnostics: d,
    }
}

/// Outcome of training an attacker against a frozen protagonist.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub theta_nu: PolicyParams,
    pub history: Vec<UpdateStats>,
}

/// Train a fresh adversary for `config.n_iter * config.n_nu` updates while the
/// protagonist plays the noise-free actions of `theta_mu_fixed`.
///
/// The adversary acts in `config.env` as given (its force cap applies even when
/// `baseline_mode` is set).
pub fn train_adversary_only(config: &TrainConfig, theta_mu_fixed: &PolicyParams) -> Result<AttackResult> {
    config.validate()?;
    let (policy_mu, policy_nu) = config.build_policies()?;
    crate::error::check_dim("protagonist parameters", policy_mu.param_count(), theta_mu_fixed.len())?;
    let attack_seed = derive_seed(config.seed, TAG_ATTACK);
    let mut theta_nu = policy_nu.init_params(derive_seed(attack_seed, TAG_INIT_NU));
    let (_, mut baseline) = config.baselines()?;
    let mut history = Vec::new();
    for i in 0..config.n_iter {
        for j in 0..config.n_nu {
            let mu = Actor::mean(policy_mu.as_ref(), theta_mu_fixed);
            let nu = Actor::sample(policy_nu.as_ref(), &theta_nu);
            let trajs = roll(&config.env, &mu, &nu, config.n_traj, roll_root(attack_seed, i, Player::Adversary, j))?;
            let out = update_player(
                policy_nu.as_ref(),
                &theta_nu,
                &trajs,
                Player::Adversary,
                &mut baseline,
                &config.adversary,
            )?;
            history.push(stats_for(i, Player::Adversary, j, &trajs, out.diagnostics));
            theta_nu = out.params;
        }
    }
    Ok(AttackResult { theta_nu, history })
}
