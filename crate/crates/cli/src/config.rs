//! Sectioned key-value experiment configuration.
//!
//! ```text
//! # comment
//! [env]
//! name = pendulum
//! mass = 4.89
//!
//! [train]
//! n_iter = 100
//! ```
//!
//! Keys are addressed as `section.key`, both in files and in `--set section.key=value`
//! overrides. Unknown keys and keys that do not apply to the selected environment are
//! errors. `env.*` keys are applied before the others because the evaluation grids
//! default to a spread around the resolved nominal physics.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::sync::Arc;

use rarl_core::envs::{make_tabular_game, parse_tabular_game};
use rarl_core::eval::{default_grid, DEFAULT_ALPHA, DEFAULT_EPISODES};
use rarl_core::{BaselineKind, EnvDescriptor, EnvKind, EnvPhysicsParams, OptimizerConfig, TrainConfig};

pub const SECTIONS: [&str; 5] = ["env", "train", "protagonist", "adversary", "eval"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line in the config file; `None` for command-line overrides.
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.msg),
            None => write!(f, "config override: {}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// One `key = value` assignment with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: Option<usize>,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError { line: Some(line), msg };
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{l}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(format!("unknown section `[{name}]`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{l}`")))?;
        let sec = section
            .as_ref()
            .ok_or_else(|| err("assignment before any [section]".into()))?;
        let key = format!("{sec}.{}", k.trim());
        if out.iter().any(|e| e.key == key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line: Some(line),
        });
    }
    Ok(out)
}

/// Parse a `--set section.key=value` override.
pub fn parse_override(s: &str) -> Result<Entry, ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError {
        line: None,
        msg: format!("expected `section.key=value`, found `{s}`"),
    })?;
    Ok(Entry {
        key: k.trim().to_string(),
        value: v.trim().to_string(),
        line: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSettings {
    pub game_seed: u64,
    pub n_states: usize,
    pub n_actions1: usize,
    pub n_actions2: usize,
    pub horizon: usize,
    /// Load the game from this file instead of generating it.
    pub game_file: Option<PathBuf>,
}

impl Default for TabularSettings {
    fn default() -> Self {
        TabularSettings {
            game_seed: 0,
            n_states: 5,
            n_actions1: 3,
            n_actions2: 3,
            horizon: 200,
            game_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    pub alpha: f64,
    /// Root seed of evaluation episodes, shared by every compared policy and grid cell.
    pub seed: u64,
    pub mass_values: Vec<f64>,
    pub friction_values: Vec<f64>,
    pub attack_iters: usize,
    pub attack_n_traj: usize,
    /// Training seeds per condition for multi-seed runs.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub physics: EnvPhysicsParams,
    pub tabular: TabularSettings,
    pub n_iter: usize,
    pub n_mu: usize,
    pub n_nu: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub baseline_mode: bool,
    pub hidden: [usize; 2],
    pub init_std_fraction: f64,
    pub checkpoint_every: usize,
    pub protagonist: OptimizerConfig,
    pub adversary: OptimizerConfig,
    pub eval: EvalSettings,
}

fn physics_defaults(kind: EnvKind) -> EnvPhysicsParams {
    match kind {
        EnvKind::Slider => EnvPhysicsParams::slider(),
        _ => EnvPhysicsParams::pendulum(),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid value `{v}`"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("invalid boolean `{v}` (true | false)")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|x| parse_num(x.trim())).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Defaults for an environment, before any key is applied.
    pub fn defaults(kind: EnvKind) -> Self {
        let t = TabularSettings::default();
        let desc = match kind {
            EnvKind::Pendulum => EnvDescriptor::Pendulum(physics_defaults(kind)),
            EnvKind::Slider => EnvDescriptor::Slider(physics_defaults(kind)),
            EnvKind::Tabular => EnvDescriptor::Tabular {
                game: Arc::new(
                    make_tabular_game(t.game_seed, t.n_states, t.n_actions1, t.n_actions2)
                        .expect("default game dimensions are valid"),
                ),
                horizon: t.horizon,
                adversary_enabled: true,
            },
        };
        let base = TrainConfig::for_env(desc);
        let mut c = ExperimentConfig {
            env: kind,
            physics: physics_defaults(kind),
            tabular: t,
            n_iter: base.n_iter,
            n_mu: base.n_mu,
            n_nu: base.n_nu,
            n_traj: base.n_traj,
            seed: base.seed,
            baseline_mode: false,
            hidden: base.hidden,
            init_std_fraction: base.init_std_fraction,
            checkpoint_every: 0,
            protagonist: base.protagonist,
            adversary: base.adversary,
            eval: EvalSettings {
                episodes: DEFAULT_EPISODES,
                alpha: DEFAULT_ALPHA,
                seed: 1000,
                mass_values: Vec::new(),
                friction_values: Vec::new(),
                attack_iters: 50,
                attack_n_traj: base.n_traj,
                seeds: 50,
            },
        };
        c.reset_grids();
        c
    }

    fn reset_grids(&mut self) {
        self.eval.mass_values = default_grid(self.physics.mass, 0.6, 9);
        self.eval.friction_values = if self.env == EnvKind::Slider {
            default_grid(self.physics.friction, 0.6, 9)
        } else {
            Vec::new()
        };
    }

    /// Resolve a config file plus overrides. Later overrides win over file entries.
    pub fn resolve(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = parse_entries(text)?;
        for o in overrides {
            let e = parse_override(o)?;
            entries.retain(|x| x.key != e.key);
            entries.push(e);
        }
        let kind = match entries.iter().find(|e| e.key == "env.name") {
            Some(e) => e.value.parse::<EnvKind>().map_err(|err| ConfigError {
                line: e.line,
                msg: err.to_string(),
            })?,
            None => EnvKind::Pendulum,
        };
        let mut c = ExperimentConfig::defaults(kind);
        let (env_entries, rest): (Vec<_>, Vec<_>) = entries.iter().partition(|e| e.key.starts_with("env."));
        for e in env_entries {
            c.set(&e.key, &e.value).map_err(|msg| ConfigError { line: e.line, msg })?;
        }
        c.reset_grids();
        for e in rest {
            c.set(&e.key, &e.value).map_err(|msg| ConfigError { line: e.line, msg })?;
        }
        c.train_config().map_err(|err| ConfigError {
            line: None,
            msg: err.to_string(),
        })?;
        c.validate_eval().map_err(|msg| ConfigError { line: None, msg })?;
        Ok(c)
    }

    fn validate_eval(&self) -> Result<(), String> {
        let e = &self.eval;
        if e.episodes == 0 || e.seeds == 0 || e.attack_iters == 0 || e.attack_n_traj == 0 {
            return Err("eval.episodes, eval.seeds, eval.attack_iters and eval.attack_n_traj must be at least 1".into());
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(format!("eval.alpha must lie in (0, 1), found {}", e.alpha));
        }
        if e.mass_values.iter().chain(&e.friction_values).any(|v| !v.is_finite() || *v < 0.0) {
            return Err("sweep values must be finite and non-negative".into());
        }
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let physics = self.env != EnvKind::Tabular;
        let not_for = |k: &str| Err(format!("key `{k}` does not apply to env `{}`", self.env.name()));
        match key {
            "env.name" => {}
            "env.mass" if physics => self.physics.mass = parse_num(v)?,
            "env.cart_mass" if self.env == EnvKind::Pendulum => self.physics.cart_mass = parse_num(v)?,
            "env.friction" if self.env == EnvKind::Slider => self.physics.friction = parse_num(v)?,
            "env.gravity" if physics => self.physics.gravity = parse_num(v)?,
            "env.dt" if physics => self.physics.dt = parse_num(v)?,
            "env.adversary_force_cap" if physics => self.physics.adversary_force_cap = parse_num(v)?,
            "env.protagonist_force_cap" if physics => self.physics.protagonist_force_cap = parse_num(v)?,
            "env.discount" if physics => self.physics.discount = parse_num(v)?,
            "env.horizon" if physics => self.physics.horizon = parse_num(v)?,
            "env.horizon" => self.tabular.horizon = parse_num(v)?,
            "env.game_seed" if !physics => self.tabular.game_seed = parse_num(v)?,
            "env.n_states" if !physics => self.tabular.n_states = parse_num(v)?,
            "env.n_actions1" if !physics => self.tabular.n_actions1 = parse_num(v)?,
            "env.n_actions2" if !physics => self.tabular.n_actions2 = parse_num(v)?,
            "env.game_file" if !physics => self.tabular.game_file = Some(PathBuf::from(v)),
            "env.mass" | "env.cart_mass" | "env.friction" | "env.gravity" | "env.dt" | "env.adversary_force_cap"
            | "env.protagonist_force_cap" | "env.discount" | "env.game_seed" | "env.n_states" | "env.n_actions1"
            | "env.n_actions2" | "env.game_file" => return not_for(key),
            "train.n_iter" => self.n_iter = parse_num(v)?,
            "train.n_mu" => self.n_mu = parse_num(v)?,
            "train.n_nu" => self.n_nu = parse_num(v)?,
            "train.n_traj" => self.n_traj = parse_num(v)?,
            "train.seed" => self.seed = parse_num(v)?,
            "train.baseline_mode" => self.baseline_mode = parse_bool(v)?,
            "train.hidden" => {
                let h: Vec<usize> = v.split(',').map(|x| parse_num(x.trim())).collect::<Result<_, _>>()?;
                self.hidden = h
                    .try_into()
                    .map_err(|_| format!("train.hidden needs two layer sizes, found `{v}`"))?;
            }
            "train.init_std_fraction" => self.init_std_fraction = parse_num(v)?,
            "train.checkpoint_every" => self.checkpoint_every = parse_num(v)?,
            "eval.episodes" => self.eval.episodes = parse_num(v)?,
            "eval.alpha" => self.eval.alpha = parse_num(v)?,
            "eval.seed" => self.eval.seed = parse_num(v)?,
            "eval.mass_values" if physics => self.eval.mass_values = parse_list(v)?,
            "eval.friction_values" if self.env == EnvKind::Slider => self.eval.friction_values = parse_list(v)?,
            "eval.mass_values" | "eval.friction_values" => return not_for(key),
            "eval.attack_iters" => self.eval.attack_iters = parse_num(v)?,
            "eval.attack_n_traj" => self.eval.attack_n_traj = parse_num(v)?,
            "eval.seeds" => self.eval.seeds = parse_num(v)?,
            _ => {
                let (sec, k) = key.split_once('.').unwrap_or(("", key));
                let opt = match sec {
                    "protagonist" => &mut self.protagonist,
                    "adversary" => &mut self.adversary,
                    _ => return Err(format!("unknown key `{key}`")),
                };
                match k {
                    "kl_delta" => opt.kl_delta = parse_num(v)?,
                    "cg_iters" => opt.cg_iters = parse_num(v)?,
                    "cg_damping" => opt.cg_damping = parse_num(v)?,
                    "backtrack_ratio" => opt.backtrack_ratio = parse_num(v)?,
                    "max_backtracks" => opt.max_backtracks = parse_num(v)?,
                    "gae_lambda" => opt.gae_lambda = parse_num(v)?,
                    "baseline" => opt.baseline = v.parse::<BaselineKind>().map_err(|e| e.to_string())?,
                    "fisher_subsample" => opt.fisher_subsample = parse_num(v)?,
                    _ => return Err(format!("unknown key `{key}`")),
                }
            }
        }
        Ok(())
    }

    /// Every resolved key, grouped by section, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
        let p = &self.physics;
        let mut env = vec![("name", self.env.name().to_string())];
        match self.env {
            EnvKind::Tabular => {
                let t = &self.tabular;
                env.push(("game_seed", t.game_seed.to_string()));
                env.push(("n_states", t.n_states.to_string()));
                env.push(("n_actions1", t.n_actions1.to_string()));
                env.push(("n_actions2", t.n_actions2.to_string()));
                env.push(("horizon", t.horizon.to_string()));
                if let Some(f) = &t.game_file {
                    env.push(("game_file", f.display().to_string()));
                }
            }
            kind => {
                env.push(("mass", p.mass.to_string()));
                if kind == EnvKind::Pendulum {
                    env.push(("cart_mass", p.cart_mass.to_string()));
                } else {
                    env.push(("friction", p.friction.to_string()));
                }
                env.push(("gravity", p.gravity.to_string()));
                env.push(("dt", p.dt.to_string()));
                env.push(("adversary_force_cap", p.adversary_force_cap.to_string()));
                env.push(("protagonist_force_cap", p.protagonist_force_cap.to_string()));
                env.push(("horizon", p.horizon.to_string()));
                env.push(("discount", p.discount.to_string()));
            }
        }
        let train = vec![
            ("n_iter", self.n_iter.to_string()),
            ("n_mu", self.n_mu.to_string()),
            ("n_nu", self.n_nu.to_string()),
            ("n_traj", self.n_traj.to_string()),
            ("seed", self.seed.to_string()),
            ("baseline_mode", self.baseline_mode.to_string()),
            ("hidden", format!("{}, {}", self.hidden[0], self.hidden[1])),
            ("init_std_fraction", self.init_std_fraction.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ];
        let opt = |o: &OptimizerConfig| {
            vec![
                ("kl_delta", o.kl_delta.to_string()),
                ("cg_iters", o.cg_iters.to_string()),
                ("cg_damping", o.cg_damping.to_string()),
                ("backtrack_ratio", o.backtrack_ratio.to_string()),
                ("max_backtracks", o.max_backtracks.to_string()),
                ("gae_lambda", o.gae_lambda.to_string()),
                ("baseline", o.baseline.to_string()),
                ("fisher_subsample", o.fisher_subsample.to_string()),
            ]
        };
        let e = &self.eval;
        let mut eval = vec![
            ("episodes", e.episodes.to_string()),
            ("alpha", e.alpha.to_string()),
            ("seed", e.seed.to_string()),
        ];
        if self.env != EnvKind::Tabular {
            eval.push(("mass_values", fmt_list(&e.mass_values)));
        }
        if self.env == EnvKind::Slider {
            eval.push(("friction_values", fmt_list(&e.friction_values)));
        }
        eval.push(("attack_iters", e.attack_iters.to_string()));
        eval.push(("attack_n_traj", e.attack_n_traj.to_string()));
        eval.push(("seeds", e.seeds.to_string()));
        vec![
            ("env", env),
            ("train", train),
            ("protagonist", opt(&self.protagonist)),
            ("adversary", opt(&self.adversary)),
            ("eval", eval),
        ]
    }

    /// The fully resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (section, keys) in self.entries() {
            let _ = writeln!(out, "\n[{section}]");
            for (k, v) in keys {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn env_descriptor(&self) -> rarl_core::Result<EnvDescriptor> {
        Ok(match self.env {
            EnvKind::Pendulum => EnvDescriptor::Pendulum(self.physics),
            EnvKind::Slider => EnvDescriptor::Slider(self.physics),
            EnvKind::Tabular => {
                let t = &self.tabular;
                let game = match &t.game_file {
                    Some(path) => {
                        let text = std::fs::read_to_string(path)?;
                        parse_tabular_game(&text)?
                    }
                    None => make_tabular_game(t.game_seed, t.n_states, t.n_actions1, t.n_actions2)?,
                };
                EnvDescriptor::Tabular {
                    game: Arc::new(game),
                    horizon: t.horizon,
                    adversary_enabled: true,
                }
            }
        })
    }

    pub fn train_config(&self) -> rarl_core::Result<TrainConfig> {
        let c = TrainConfig {
            env: self.env_descriptor()?,
            n_iter: self.n_iter,
            n_mu: self.n_mu,
            n_nu: self.n_nu,
            n_traj: self.n_traj,
            seed: self.seed,
            protagonist: self.protagonist,
            adversary: self.adversary,
            baseline_mode: self.baseline_mode,
            hidden: self.hidden,
            init_std_fraction: self.init_std_fraction,
            checkpoint_every: self.checkpoint_every,
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_round_trips() {
        for kind in ["pendulum", "slider", "tabular"] {
            let c = ExperimentConfig::resolve(&format!("[env]\nname = {kind}\n"), &[]).unwrap();
            let again = ExperimentConfig::resolve(&c.to_text(), &[]).unwrap();
            assert_eq!(c, again, "{kind}");
        }
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = ExperimentConfig::resolve("[train]\nn_iter = 3\n\nn_itr = 4\n", &[]).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.msg.contains("train.n_itr"));
        let err = ExperimentConfig::resolve("", &["train.nope=1".into()]).unwrap_err();
        assert_eq!(err.line, None);
        let err = ExperimentConfig::resolve("[env]\nname = pendulum\nfriction = 0.1\n", &[]).unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn overrides_win_and_grids_follow_mass() {
        let c = ExperimentConfig::resolve("[train]\nn_iter = 7\n", &["train.n_iter=2".into(), "env.mass=5".into()])
            .unwrap();
        assert_eq!(c.n_iter, 2);
        assert!(c.to_text().contains("n_iter = 2"));
        assert!((c.eval.mass_values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert_eq!(parse_entries("x = 1\n").unwrap_err().line, Some(1));
        assert_eq!(parse_entries("[env]\nname\n").unwrap_err().line, Some(2));
        assert_eq!(parse_entries("[bogus]\n").unwrap_err().line, Some(1));
        assert_eq!(parse_entries("[env]\nname = a\nname = b\n").unwrap_err().line, Some(3));
    }
}
