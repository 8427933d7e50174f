//! Two-player zero-sum environment interface and trajectory containers.
//!
//! Every environment in this crate is a deterministic state machine: the only
//! randomness is the start-state draw in [`ZeroSumEnv::reset`]. The protagonist
//! receives `reward1 = r` and the adversary `reward2 = -r` on every step.

use std::io::{self, Write};

use crate::error::{check_dim, invalid, Error, Result};

/// Which side of the zero-sum game a policy plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Protagonist,
    Adversary,
}

impl Player {
    pub fn index(self) -> usize {
        match self {
            Player::Protagonist => 1,
            Player::Adversary => 2,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Player::Protagonist => "protagonist",
            Player::Adversary => "adversary",
        })
    }
}

/// Closed interval an action coordinate is clamped into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn symmetric(cap: f64) -> Self {
        Bounds { lo: -cap, hi: cap }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        // NaN maps to the lower bound so rollouts stay total.
        if x.is_nan() {
            self.lo
        } else {
            x.clamp(self.lo, self.hi)
        }
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act1_dim: usize,
    pub act2_dim: usize,
    pub act1_bounds: Vec<Bounds>,
    pub act2_bounds: Vec<Bounds>,
    pub horizon: usize,
    pub discount: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        check_dim("act1_bounds", self.act1_dim, self.act1_bounds.len())?;
        check_dim("act2_bounds", self.act2_dim, self.act2_bounds.len())?;
        for b in &self.act1_bounds {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return Err(invalid("act1_bounds", format!("{b:?}")));
            }
        }
        // A zero-strength adversary has degenerate [0, 0] bounds.
        for b in &self.act2_bounds {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi) {
                return Err(invalid("act2_bounds", format!("{b:?}")));
            }
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid("discount", format!("{} not in (0, 1]", self.discount)));
        }
        Ok(())
    }

    pub fn bounds(&self, player: Player) -> &[Bounds] {
        match player {
            Player::Protagonist => &self.act1_bounds,
            Player::Adversary => &self.act2_bounds,
        }
    }

    pub fn act_dim(&self, player: Player) -> usize {
        match player {
            Player::Protagonist => self.act1_dim,
            Player::Adversary => self.act2_dim,
        }
    }
}

/// Clamp `action` coordinate-wise into `bounds`.
pub fn clamp_action(bounds: &[Bounds], action: &[f64]) -> Vec<f64> {
    bounds.iter().zip(action).map(|(b, &a)| b.clamp(a)).collect()
}

/// Reject an action whose length differs from the player's declared action dimension.
pub fn check_action_dim(spec: &EnvSpec, player: Player, action: &[f64]) -> Result<()> {
    let context = match player {
        Player::Protagonist => "protagonist action",
        Player::Adversary => "adversary action",
    };
    check_dim(context, spec.act_dim(player), action.len())
}

/// Result of a single [`ZeroSumEnv::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next_state: Vec<f64>,
    pub reward1: f64,
    pub reward2: f64,
    /// The episode ended through failure or an absorbing state.
    pub terminal: bool,
    /// The episode clock reached the horizon.
    pub truncated: bool,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// A two-player zero-sum Markov game with continuous (or one-hot encoded) states.
pub trait ZeroSumEnv: Send {
    fn name(&self) -> &'static str;

    fn spec(&self) -> &EnvSpec;

    /// Draw a start state deterministically from `seed` and zero the episode clock.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advance one step. Actions are clamped into the declared bounds.
    fn step(&mut self, action1: &[f64], action2: &[f64]) -> Result<Transition>;
}

impl ZeroSumEnv for Box<dyn ZeroSumEnv> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (**self).reset(seed)
    }
    fn step(&mut self, action1: &[f64], action2: &[f64]) -> Result<Transition> {
        (**self).step(action1, action2)
    }
}

/// One transition `(s, a1, a2, r1, r2, s')` of the game.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlayerStep {
    pub state: Vec<f64>,
    pub action1: Vec<f64>,
    pub action2: Vec<f64>,
    pub reward1: f64,
    pub reward2: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TwoPlayerStep>,
    pub discount: f64,
    pub horizon: usize,
}

impl Trajectory {
    pub fn new(discount: f64, horizon: usize) -> Self {
        Trajectory {
            steps: Vec::new(),
            discount,
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn terminated(&self) -> bool {
        self.steps.last().is_some_and(|s| s.terminal)
    }

    /// Undiscounted sum of protagonist rewards.
    pub fn total_reward1(&self) -> f64 {
        self.steps.iter().map(|s| s.reward1).sum()
    }

    /// Check the container invariants (length, terminal placement, state chaining, zero-sum).
    pub fn validate(&self) -> Result<()> {
        if self.steps.len() > self.horizon {
            return Err(invalid("trajectory", "longer than horizon"));
        }
        for (t, step) in self.steps.iter().enumerate() {
            if step.terminal && t + 1 != self.steps.len() {
                return Err(invalid("trajectory", format!("terminal step {t} is not last")));
            }
            if step.reward2.to_bits() != (-step.reward1).to_bits() {
                return Err(invalid("trajectory", format!("step {t} is not zero-sum")));
            }
        }
        for (t, pair) in self.steps.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(invalid("trajectory", format!("state chain broken at {t}")));
            }
        }
        Ok(())
    }
}

/// One `(state, action, reward)` triple of a single-player view.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

/// A trajectory seen by one player: its own actions and rewards only.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleAgentView {
    pub player: Player,
    pub steps: Vec<AgentStep>,
    /// State after the last step, or `None` if the episode terminated.
    pub bootstrap_state: Option<Vec<f64>>,
    pub horizon: usize,
}

impl SingleAgentView {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }

    pub fn discounted_return(&self, discount: f64) -> f64 {
        discounted_sum(self.rewards(), discount)
    }
}

/// Project a two-player trajectory onto one player's `(s, a, r)` triples.
pub fn split(trajectory: &Trajectory, player: Player) -> Result<SingleAgentView> {
    let last = trajectory
        .steps
        .last()
        .ok_or(Error::Empty("trajectory passed to split"))?;
    let steps = trajectory
        .steps
        .iter()
        .map(|s| match player {
            Player::Protagonist => AgentStep {
                state: s.state.clone(),
                action: s.action1.clone(),
                reward: s.reward1,
            },
            Player::Adversary => AgentStep {
                state: s.state.clone(),
                action: s.action2.clone(),
                reward: s.reward2,
            },
        })
        .collect();
    Ok(SingleAgentView {
        player,
        steps,
        bootstrap_state: (!last.terminal).then(|| last.next_state.clone()),
        horizon: trajectory.horizon,
    })
}

/// `sum_t discount^t r_t`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    discounted_sum(rewards.iter().copied(), discount)
}

fn discounted_sum(rewards: impl Iterator<Item = f64>, discount: f64) -> f64 {
    let mut acc = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        acc += weight * r;
        weight *= discount;
    }
    acc
}

/// Number of columns in a serialized step record for an environment.
pub fn trajectory_columns(spec: &EnvSpec) -> usize {
    1 + spec.obs_dim + spec.act1_dim + spec.act2_dim + 2
}

/// Write a trajectory as newline-delimited records
/// `t,state...,action1...,action2...,reward1,terminal` (terminal as 0/1).
pub fn write_trajectory<W: Write>(out: &mut W, trajectory: &Trajectory) -> io::Result<()> {
    for (t, step) in trajectory.steps.iter().enumerate() {
        write!(out, "{t}")?;
        for v in step.state.iter().chain(&step.action1).chain(&step.action2) {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{}", step.reward1, u8::from(step.terminal))?;
    }
    Ok(())
}

/// A parsed trajectory record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub state: Vec<f64>,
    pub action1: Vec<f64>,
    pub action2: Vec<f64>,
    pub reward1: f64,
    pub terminal: bool,
}

/// Parse records written by [`write_trajectory`].
pub fn read_trajectory(text: &str, spec: &EnvSpec) -> Result<Vec<StepRecord>> {
    let cols = trajectory_columns(spec);
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {cols} columns, found {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("`{s}`: {e}"),
            })
        };
        let t = fields[0].trim().parse::<usize>().map_err(|e| Error::Parse {
            line: line_no,
            msg: format!("step index: {e}"),
        })?;
        let mut at = 1;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v = fields[at..at + n].iter().map(|s| num(s)).collect();
            at += n;
            v
        };
        let state = take(spec.obs_dim)?;
        let action1 = take(spec.act1_dim)?;
        let action2 = take(spec.act2_dim)?;
        let tail = take(2)?;
        records.push(StepRecord {
            t,
            state,
            action1,
            action2,
            reward1: tail[0],
            terminal: tail[1] != 0.0,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: f64, r: f64, terminal: bool) -> TwoPlayerStep {
        TwoPlayerStep {
            state: vec![s],
            action1: vec![s * 2.0],
            action2: vec![-s, s],
            reward1: r,
            reward2: -r,
            next_state: vec![s + 1.0],
            terminal,
        }
    }

    fn traj(rewards: &[f64]) -> Trajectory {
        let mut t = Trajectory::new(0.9, 10);
        let n = rewards.len();
        for (i, &r) in rewards.iter().enumerate() {
            t.steps.push(step(i as f64, r, i + 1 == n));
        }
        t
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0), 3.0);
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
    }

    #[test]
    fn split_maps_actions_and_rewards() {
        let t = traj(&[0.5, -1.0, 2.0]);
        t.validate().unwrap();
        let v1 = split(&t, Player::Protagonist).unwrap();
        let v2 = split(&t, Player::Adversary).unwrap();
        assert_eq!(v1.len(), 3);
        for ((a, b), s) in v1.steps.iter().zip(&v2.steps).zip(&t.steps) {
            assert_eq!(a.reward + b.reward, 0.0);
            assert_eq!(a.action, s.action1);
            assert_eq!(b.action, s.action2);
        }
        assert_eq!(v1.discounted_return(1.0), t.total_reward1());
        assert!(v1.bootstrap_state.is_none());
    }

    #[test]
    fn split_empty_is_error() {
        let t = Trajectory::new(0.9, 10);
        assert!(matches!(split(&t, Player::Protagonist), Err(Error::Empty(_))));
    }

    #[test]
    fn validate_rejects_misplaced_terminal() {
        let mut t = traj(&[1.0, 1.0]);
        t.steps[0].terminal = true;
        assert!(t.validate().is_err());
    }

    #[test]
    fn serialization_column_count() {
        let spec = EnvSpec {
            obs_dim: 1,
            act1_dim: 1,
            act2_dim: 2,
            act1_bounds: vec![Bounds::symmetric(1.0)],
            act2_bounds: vec![Bounds::symmetric(1.0); 2],
            horizon: 10,
            discount: 0.9,
        };
        let t = traj(&[0.1, 0.2]);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first.split(',').count(), trajectory_columns(&spec));
        let recs = read_trajectory(&text, &spec).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].reward1, 0.2);
        assert!(recs[1].terminal);
        assert_eq!(recs[0].action2, t.steps[0].action2);
    }

    #[test]
    fn nan_actions_clamp_to_lower_bound() {
        let b = [Bounds::symmetric(2.0)];
        assert_eq!(clamp_action(&b, &[f64::NAN]), vec![-2.0]);
        assert_eq!(clamp_action(&b, &[5.0]), vec![2.0]);
    }
}
