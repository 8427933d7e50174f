//! Batch policy optimization: fitted baselines, GAE advantages, the importance-weighted
//! surrogate and a KL-constrained natural-gradient step.

mod advantages;
mod baseline;
mod config;
mod trpo;

pub use advantages::{compute_advantages, gae, normalize_advantages, raw_advantages, AdvantageBatch};
pub use baseline::{
    fit_baseline, linear_feature_count, linear_features, returns_to_go, ridge_least_squares, Baseline, MlpBaseline,
};
pub use config::{BaselineKind, OptimizerConfig};
pub use trpo::{
    conjugate_gradient, fisher_vector_product, mean_kl, surrogate, surrogate_and_gradient, trpo_step,
    StepDiagnostics, StepRejection, TrpoOutcome,
};
