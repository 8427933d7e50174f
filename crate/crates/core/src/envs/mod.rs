//! Native deterministic environments.
//!
//! * [`InvertedPendulum`]: cart-pole whose adversary pushes the pole's centre of mass in 2D.
//! * [`FrictionSlider`]: point mass on a rough floor; the adversary pushes horizontally.
//! * [`TabularGameEnv`]: a finite zero-sum Markov game, used to check training against
//!   exact equilibrium solutions.

mod pendulum;
mod slider;
mod tabular;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use pendulum::{pendulum_energy, InvertedPendulum, PendulumState, INIT_BOX, POLE_HALF_LENGTH};
pub use slider::FrictionSlider;
pub use tabular::{
    decode_state, make_tabular_game, parse_tabular_game, write_tabular_game, TabularGame, TabularGameEnv,
    TABULAR_DISCOUNT,
};

use crate::env::ZeroSumEnv;
use crate::error::{invalid, Result};

/// Physical knobs that differ between training and test conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvPhysicsParams {
    /// Pole mass (pendulum) or body mass (slider), kg.
    pub mass: f64,
    /// Cart mass, kg. Pendulum only.
    pub cart_mass: f64,
    /// Coulomb friction coefficient. Slider only.
    pub friction: f64,
    pub gravity: f64,
    pub dt: f64,
    pub adversary_force_cap: f64,
    pub protagonist_force_cap: f64,
    /// Episode length cap.
    pub horizon: usize,
    pub discount: f64,
}

impl EnvPhysicsParams {
    /// Nominal pendulum: 4.89 kg pole, 2 N adversary, 10 N protagonist.
    pub fn pendulum() -> Self {
        EnvPhysicsParams {
            mass: 4.89,
            cart_mass: 1.0,
            friction: 0.0,
            gravity: 9.81,
            dt: 0.02,
            adversary_force_cap: 2.0,
            protagonist_force_cap: 10.0,
            horizon: 1000,
            discount: 0.995,
        }
    }

    /// Nominal slider: 3.53 kg body, 1 N adversary, 5 N protagonist.
    pub fn slider() -> Self {
        EnvPhysicsParams {
            mass: 3.53,
            cart_mass: 0.0,
            friction: 0.02,
            gravity: 9.81,
            dt: 0.05,
            adversary_force_cap: 1.0,
            protagonist_force_cap: 5.0,
            horizon: 500,
            discount: 0.995,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", format!("{} must be positive", self.mass)));
        }
        if !(self.cart_mass >= 0.0 && self.cart_mass.is_finite()) {
            return Err(invalid("cart_mass", format!("{} must be non-negative", self.cart_mass)));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(invalid("friction", format!("{} must be non-negative", self.friction)));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(invalid("gravity", format!("{}", self.gravity)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.adversary_force_cap >= 0.0 && self.adversary_force_cap.is_finite()) {
            return Err(invalid("adversary_force_cap", format!("{}", self.adversary_force_cap)));
        }
        if !(self.protagonist_force_cap > 0.0 && self.protagonist_force_cap.is_finite()) {
            return Err(invalid("protagonist_force_cap", format!("{}", self.protagonist_force_cap)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid("discount", format!("{} not in (0, 1]", self.discount)));
        }
        Ok(())
    }
}

/// Which environment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Pendulum,
    Slider,
    Tabular,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Slider => "slider",
            EnvKind::Tabular => "tabular",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "slider" => Ok(EnvKind::Slider),
            "tabular" => Ok(EnvKind::Tabular),
            other => Err(invalid("env.name", format!("unknown environment `{other}`"))),
        }
    }
}

/// Everything needed to build fresh, independent environment instances.
#[derive(Debug, Clone)]
pub enum EnvDescriptor {
    Pendulum(EnvPhysicsParams),
    Slider(EnvPhysicsParams),
    Tabular {
        game: Arc<TabularGame>,
        horizon: usize,
        adversary_enabled: bool,
    },
}

impl EnvDescriptor {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvDescriptor::Pendulum(_) => EnvKind::Pendulum,
            EnvDescriptor::Slider(_) => EnvKind::Slider,
            EnvDescriptor::Tabular { .. } => EnvKind::Tabular,
        }
    }

    pub fn build(&self) -> Result<Box<dyn ZeroSumEnv>> {
        Ok(match self {
            EnvDescriptor::Pendulum(p) => Box::new(InvertedPendulum::new(*p)?),
            EnvDescriptor::Slider(p) => Box::new(FrictionSlider::new(*p)?),
            EnvDescriptor::Tabular {
                game,
                horizon,
                adversary_enabled,
            } => Box::new(TabularGameEnv::new(game.clone(), *horizon, *adversary_enabled)?),
        })
    }

    /// The same environment with a zero-strength adversary.
    pub fn without_adversary(&self) -> Self {
        match self {
            EnvDescriptor::Pendulum(p) => EnvDescriptor::Pendulum(EnvPhysicsParams {
                adversary_force_cap: 0.0,
                ..*p
            }),
            EnvDescriptor::Slider(p) => EnvDescriptor::Slider(EnvPhysicsParams {
                adversary_force_cap: 0.0,
                ..*p
            }),
            EnvDescriptor::Tabular { game, horizon, .. } => EnvDescriptor::Tabular {
                game: game.clone(),
                horizon: *horizon,
                adversary_enabled: false,
            },
        }
    }

    pub fn physics(&self) -> Option<&EnvPhysicsParams> {
        match self {
            EnvDescriptor::Pendulum(p) | EnvDescriptor::Slider(p) => Some(p),
            EnvDescriptor::Tabular { .. } => None,
        }
    }

    /// Replace the physics parameters, keeping the environment family.
    pub fn with_physics(&self, params: EnvPhysicsParams) -> Result<Self> {
        match self {
            EnvDescriptor::Pendulum(_) => Ok(EnvDescriptor::Pendulum(params)),
            EnvDescriptor::Slider(_) => Ok(EnvDescriptor::Slider(params)),
            EnvDescriptor::Tabular { .. } => Err(crate::error::Error::Unsupported {
                env: "tabular",
                what: "physics parameters",
            }),
        }
    }
}

/// Uniform draw in `[-half_width, half_width]` for each coordinate, seeded.
pub(crate) fn uniform_box(seed: u64, half_widths: &[f64]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    half_widths
        .iter()
        .map(|&w| rng.random_range(-w..=w))
        .collect()
}
