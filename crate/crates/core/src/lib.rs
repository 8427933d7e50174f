//! Robust adversarial reinforcement learning: a protagonist and an adversary trained by
//! alternating trust-region steps on zero-sum environments, with exact tabular game
//! solvers for checking convergence and an evaluation harness for robustness studies.

pub mod env;
pub mod envs;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod optimizer;
pub mod oracle;
pub mod policy;
pub mod rollout;
pub mod trainer;

pub use env::{EnvSpec, Player, Trajectory, Transition, ZeroSumEnv};
pub use envs::{EnvDescriptor, EnvKind, EnvPhysicsParams, TabularGame};
pub use error::{Error, Result};
pub use eval::{EvalAdversary, EvalStats, SweepGrid};
pub use optimizer::{BaselineKind, OptimizerConfig};
pub use oracle::{MatrixGameSolution, RiskStats};
pub use policy::{PolicyArch, PolicyParams, StochasticPolicy};
pub use trainer::{TrainConfig, TrainResult};
