use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Bounds, EnvSpec, Transition, ZeroSumEnv};
use crate::error::{check_dim, invalid, Error, Result};

/// Default discount for tabular games.
pub const TABULAR_DISCOUNT: f64 = 0.95;

/// A finite two-player zero-sum discounted Markov game.
///
/// Tables are stored flat in row-major order: `reward[(s * n1 + a1) * n2 + a2]` and
/// `transition[((s * n1 + a1) * n2 + a2) * n_states + s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularGame {
    pub n_states: usize,
    pub n_actions1: usize,
    pub n_actions2: usize,
    pub reward: Vec<f64>,
    pub transition: Vec<f64>,
    pub start_state: usize,
    pub discount: f64,
}

impl TabularGame {
    fn index(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions1 + a1) * self.n_actions2 + a2
    }

    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.reward[self.index(s, a1, a2)]
    }

    pub fn next_distribution(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let i = self.index(s, a1, a2) * self.n_states;
        &self.transition[i..i + self.n_states]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions1 == 0 || self.n_actions2 == 0 {
            return Err(invalid("tabular game", "dimensions must be positive"));
        }
        let cells = self.n_states * self.n_actions1 * self.n_actions2;
        check_dim("reward table", cells, self.reward.len())?;
        check_dim("transition table", cells * self.n_states, self.transition.len())?;
        if self.start_state >= self.n_states {
            return Err(invalid("start_state", format!("{} out of range", self.start_state)));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid("discount", format!("{} not in (0, 1]", self.discount)));
        }
        if self.reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward table"));
        }
        for row in self.transition.chunks(self.n_states) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(invalid("transition", format!("row {row:?} is not a distribution")));
            }
        }
        Ok(())
    }

    /// Stage payoff matrix at `s` given continuation values `v`:
    /// `Q[a1][a2] = r(s, a1, a2) + discount * sum_s' P(s'|s, a1, a2) v(s')`.
    pub fn q_matrix(&self, s: usize, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_actions1)
            .map(|a1| {
                (0..self.n_actions2)
                    .map(|a2| {
                        let cont: f64 = self
                            .next_distribution(s, a1, a2)
                            .iter()
                            .zip(v)
                            .map(|(p, v)| p * v)
                            .sum();
                        self.reward(s, a1, a2) + self.discount * cont
                    })
                    .collect()
            })
            .collect()
    }

    /// The same game seen from the other side: players swap roles and rewards negate.
    pub fn swap_players(&self) -> TabularGame {
        let (n1, n2, ns) = (self.n_actions2, self.n_actions1, self.n_states);
        let mut reward = vec![0.0; self.reward.len()];
        let mut transition = vec![0.0; self.transition.len()];
        for s in 0..ns {
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    let dst = (s * n1 + a1) * n2 + a2;
                    reward[dst] = -self.reward(s, a2, a1);
                    transition[dst * ns..(dst + 1) * ns]
                        .copy_from_slice(self.next_distribution(s, a2, a1));
                }
            }
        }
        TabularGame {
            n_states: ns,
            n_actions1: n1,
            n_actions2: n2,
            reward,
            transition,
            start_state: self.start_state,
            discount: self.discount,
        }
    }

    pub fn reward_range(&self) -> f64 {
        let (lo, hi) = self
            .reward
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        hi - lo
    }
}

/// Generate a game with rewards uniform in `[-1, 1]` and sparse random transition kernels
/// (each row supported on at most three successor states).
pub fn make_tabular_game(seed: u64, n_states: usize, n_actions1: usize, n_actions2: usize) -> Result<TabularGame> {
    if n_states == 0 || n_actions1 == 0 || n_actions2 == 0 {
        return Err(invalid("tabular game", "dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = n_states * n_actions1 * n_actions2;
    let reward: Vec<f64> = (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut transition = vec![0.0; cells * n_states];
    for row in transition.chunks_mut(n_states) {
        let support = rng.random_range(1..=n_states.min(3));
        let picks = sample(&mut rng, n_states, support);
        let weights: Vec<f64> = (0..support).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (s, w) in picks.iter().zip(&weights) {
            row[s] = w / total;
        }
    }
    let game = TabularGame {
        n_states,
        n_actions1,
        n_actions2,
        reward,
        transition,
        start_state: 0,
        discount: TABULAR_DISCOUNT,
    };
    game.validate()?;
    Ok(game)
}

/// Serialize in the plain-text game format:
///
/// ```text
/// # comments and blank lines are ignored
/// <n_states> <n_actions1> <n_actions2>
/// <start_state> <discount>
/// n_states*n_actions1 reward lines, each with n_actions2 values   (order: s, a1)
/// n_states*n_actions1*n_actions2 transition lines, each with n_states values (order: s, a1, a2)
/// ```
pub fn write_tabular_game(game: &TabularGame) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tabular zero-sum Markov game");
    let _ = writeln!(out, "{} {} {}", game.n_states, game.n_actions1, game.n_actions2);
    let _ = writeln!(out, "{} {}", game.start_state, game.discount);
    let _ = writeln!(out, "# rewards");
    for row in game.reward.chunks(game.n_actions2) {
        let _ = writeln!(out, "{}", join(row));
    }
    let _ = writeln!(out, "# transitions");
    for row in game.transition.chunks(game.n_states) {
        let _ = writeln!(out, "{}", join(row));
    }
    out
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Parse the format written by [`write_tabular_game`]. Errors carry 1-based line numbers.
pub fn parse_tabular_game(text: &str) -> Result<TabularGame> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut last_line = 0;
    let mut next_row = |what: &str| -> Result<(usize, Vec<&str>)> {
        match lines.next() {
            Some((n, l)) => {
                last_line = n;
                Ok((n, l.split_whitespace().collect()))
            }
            None => Err(Error::Parse {
                line: last_line + 1,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    fn nums<T: std::str::FromStr>(line: usize, fields: &[&str], want: usize, what: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        if fields.len() != want {
            return Err(Error::Parse {
                line,
                msg: format!("{what}: expected {want} values, found {}", fields.len()),
            });
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<T>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("{what}: `{f}`: {e}"),
                })
            })
            .collect()
    }

    let (ln, f) = next_row("dimension header")?;
    let dims: Vec<usize> = nums(ln, &f, 3, "dimension header")?;
    let (ns, n1, n2) = (dims[0], dims[1], dims[2]);
    if ns == 0 || n1 == 0 || n2 == 0 {
        return Err(Error::Parse {
            line: ln,
            msg: "dimensions must be positive".into(),
        });
    }
    let (ln, f) = next_row("start state and discount")?;
    if f.len() != 2 {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected `<start_state> <discount>`, found {} values", f.len()),
        });
    }
    let start_state: usize = nums(ln, &f[..1], 1, "start state")?[0];
    let discount: f64 = nums(ln, &f[1..], 1, "discount")?[0];
    if start_state >= ns {
        return Err(Error::Parse {
            line: ln,
            msg: format!("start state {start_state} out of range"),
        });
    }

    let mut reward = Vec::with_capacity(ns * n1 * n2);
    for _ in 0..ns * n1 {
        let (ln, f) = next_row("reward row")?;
        reward.extend(nums::<f64>(ln, &f, n2, "reward row")?);
    }
    let mut transition = Vec::with_capacity(ns * n1 * n2 * ns);
    for _ in 0..ns * n1 * n2 {
        let (ln, f) = next_row("transition row")?;
        let row: Vec<f64> = nums(ln, &f, ns, "transition row")?;
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("transition row sums to {sum}, expected a probability vector"),
            });
        }
        // Re-normalize so the stored kernel meets the 1e-12 row-sum invariant.
        transition.extend(row.iter().map(|p| p / sum));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            msg: "trailing data after transition table".into(),
        });
    }
    let game = TabularGame {
        n_states: ns,
        n_actions1: n1,
        n_actions2: n2,
        reward,
        transition,
        start_state,
        discount,
    };
    game.validate().map_err(|e| Error::Parse {
        line: 2,
        msg: e.to_string(),
    })?;
    Ok(game)
}

/// A [`TabularGame`] as a [`ZeroSumEnv`].
///
/// States are exposed as one-hot vectors of length `n_states`; actions are single real
/// coordinates rounded to the nearest index and clamped into range. Successor states are
/// drawn from a stream seeded by [`ZeroSumEnv::reset`], so an episode is a deterministic
/// function of the seed and the action sequence.
#[derive(Debug, Clone)]
pub struct TabularGameEnv {
    game: Arc<TabularGame>,
    spec: EnvSpec,
    adversary_enabled: bool,
    state: usize,
    clock: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl TabularGameEnv {
    pub fn new(game: Arc<TabularGame>, horizon: usize, adversary_enabled: bool) -> Result<Self> {
        game.validate()?;
        if game.n_actions1 < 2 {
            return Err(invalid("n_actions1", "the protagonist needs at least two actions"));
        }
        let a2_hi = if adversary_enabled { (game.n_actions2 - 1) as f64 } else { 0.0 };
        let spec = EnvSpec {
            obs_dim: game.n_states,
            act1_dim: 1,
            act2_dim: 1,
            act1_bounds: vec![Bounds {
                lo: 0.0,
                hi: (game.n_actions1 - 1) as f64,
            }],
            act2_bounds: vec![Bounds { lo: 0.0, hi: a2_hi }],
            horizon,
            discount: game.discount,
        };
        spec.validate()?;
        Ok(TabularGameEnv {
            state: game.start_state,
            game,
            spec,
            adversary_enabled,
            clock: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn game(&self) -> &TabularGame {
        &self.game
    }

    fn one_hot(&self, s: usize) -> Vec<f64> {
        one_hot(self.game.n_states, s)
    }
}

pub(crate) fn one_hot(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// Decode a one-hot (or near one-hot) state vector into its index.
pub fn decode_state(state: &[f64]) -> usize {
    state
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn decode_action(a: f64, bounds: &Bounds) -> usize {
    bounds.clamp(a.round()) as usize
}

impl ZeroSumEnv for TabularGameEnv {
    fn name(&self) -> &'static str {
        "tabular"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.game.start_state;
        self.clock = 0;
        self.done = false;
        self.one_hot(self.state)
    }

    fn step(&mut self, action1: &[f64], action2: &[f64]) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        check_dim("tabular action1", 1, action1.len())?;
        check_dim("tabular action2", 1, action2.len())?;
        let a1 = decode_action(action1[0], &self.spec.act1_bounds[0]);
        let a2 = if self.adversary_enabled {
            decode_action(action2[0], &self.spec.act2_bounds[0])
        } else {
            0
        };
        let reward = self.game.reward(self.state, a1, a2);
        let u: f64 = self.rng.random();
        let dist = self.game.next_distribution(self.state, a1, a2);
        let mut acc = 0.0;
        let mut next = dist.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (s, &p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                next = s;
                break;
            }
        }
        self.state = next;
        self.clock += 1;
        let truncated = self.clock >= self.spec.horizon;
        self.done = truncated;
        Ok(Transition {
            next_state: self.one_hot(next),
            reward1: reward,
            reward2: -reward,
            terminal: false,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_normalized() {
        let a = make_tabular_game(11, 5, 3, 3).unwrap();
        let b = make_tabular_game(11, 5, 3, 3).unwrap();
        assert_eq!(a, b);
        for row in a.transition.chunks(a.n_states) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(row.iter().filter(|&&p| p > 0.0).count() <= 3);
        }
        assert!(a.reward.iter().all(|r| (-1.0..=1.0).contains(r)));
        assert_ne!(a, make_tabular_game(12, 5, 3, 3).unwrap());
    }

    #[test]
    fn text_format_round_trips() {
        let g = make_tabular_game(3, 4, 2, 3).unwrap();
        let parsed = parse_tabular_game(&write_tabular_game(&g)).unwrap();
        assert_eq!(parsed.reward, g.reward);
        assert_eq!(parsed.n_actions2, 3);
        for (a, b) in parsed.transition.iter().zip(&g.transition) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn parse_errors_report_lines() {
        let text = "2 2 2\n0 0.9\n1 2\n3 4\n5 6\n7 x\n";
        match parse_tabular_game(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        match parse_tabular_game("1 1 1\n0 0.9\n0.5\n0.5\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4, "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_tabular_game("2 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn swap_is_an_involution() {
        let g = make_tabular_game(5, 3, 2, 4).unwrap();
        let s = g.swap_players();
        assert_eq!(s.n_actions1, 4);
        assert_eq!(s.reward(1, 3, 1), -g.reward(1, 1, 3));
        assert_eq!(s.swap_players(), g);
    }

    #[test]
    fn env_starts_at_start_state_and_is_deterministic() {
        let g = Arc::new(make_tabular_game(2, 5, 3, 3).unwrap());
        let mut e = TabularGameEnv::new(g.clone(), 50, true).unwrap();
        let s0 = e.reset(42);
        assert_eq!(decode_state(&s0), g.start_state);
        let run = |e: &mut TabularGameEnv| {
            e.reset(42);
            (0..50)
                .map(|k| e.step(&[(k % 3) as f64], &[((k / 3) % 3) as f64]).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(&mut e);
        let b = run(&mut e);
        assert_eq!(a, b);
        assert!(a.last().unwrap().truncated);
    }

    #[test]
    fn disabled_adversary_always_plays_zero() {
        let g = Arc::new(make_tabular_game(2, 3, 3, 3).unwrap());
        let mut e = TabularGameEnv::new(g.clone(), 10, false).unwrap();
        e.reset(0);
        let tr = e.step(&[1.0], &[2.0]).unwrap();
        assert_eq!(tr.reward1, g.reward(g.start_state, 1, 0));
    }
}
