use crate::error::{invalid, Result};

/// Value-function model used to reduce advantage variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Least squares over `[state, state^2, t, t^2, t^3, 1]` with `t` the normalized time.
    LinearFeatures,
    /// Small tanh network fitted by full-batch Adam.
    Mlp,
}

impl std::str::FromStr for BaselineKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "linear-features" => Ok(BaselineKind::LinearFeatures),
            "mlp" => Ok(BaselineKind::Mlp),
            other => Err(invalid("baseline", format!("unknown baseline `{other}` (linear | mlp)"))),
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::LinearFeatures => "linear",
            BaselineKind::Mlp => "mlp",
        })
    }
}

/// Trust-region step constants for one player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Mean-KL trust region size.
    pub kl_delta: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub gae_lambda: f64,
    pub baseline: BaselineKind,
    /// Use every `fisher_subsample`-th state for Fisher-vector products (1 = all).
    pub fisher_subsample: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kl_delta: 0.01,
            cg_iters: 10,
            cg_damping: 0.1,
            backtrack_ratio: 0.5,
            max_backtracks: 10,
            gae_lambda: 0.97,
            baseline: BaselineKind::LinearFeatures,
            fisher_subsample: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kl_delta > 0.0 && self.kl_delta.is_finite()) {
            return Err(invalid("kl_delta", format!("{} must be positive", self.kl_delta)));
        }
        if self.cg_iters == 0 {
            return Err(invalid("cg_iters", "must be at least 1"));
        }
        if !(self.cg_damping >= 0.0 && self.cg_damping.is_finite()) {
            return Err(invalid("cg_damping", format!("{} must be non-negative", self.cg_damping)));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(invalid("backtrack_ratio", format!("{} not in (0, 1)", self.backtrack_ratio)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(invalid("gae_lambda", format!("{} not in [0, 1]", self.gae_lambda)));
        }
        if self.fisher_subsample == 0 {
            return Err(invalid("fisher_subsample", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid_and_bad_values_rejected() {
        OptimizerConfig::default().validate().unwrap();
        for bad in [
            OptimizerConfig {
                kl_delta: 0.0,
                ..Default::default()
            },
            OptimizerConfig {
                cg_iters: 0,
                ..Default::default()
            },
            OptimizerConfig {
                backtrack_ratio: 1.0,
                ..Default::default()
            },
            OptimizerConfig {
                gae_lambda: 1.5,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
