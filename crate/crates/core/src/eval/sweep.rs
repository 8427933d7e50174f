use super::csv::{DifferenceRow, SweepRow};
use super::{evaluate, EvalAdversary, EvalStats};
use crate::envs::{EnvDescriptor, EnvKind, EnvPhysicsParams};
use crate::error::{invalid, Error, Result};
use crate::policy::StochasticPolicy;

/// `steps` values spread evenly over `nominal * [1 - spread, 1 + spread]`.
pub fn default_grid(nominal: f64, spread: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![nominal],
        _ => (0..steps)
            .map(|k| nominal * (1.0 - spread + 2.0 * spread * k as f64 / (steps - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub mass: f64,
    pub friction: f64,
    pub stats: EvalStats,
}

/// Evaluations over a one- or two-dimensional grid of physics parameters. Cells are
/// ordered with the first axis outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub episodes: usize,
    pub seed_base: u64,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.cells
            .iter()
            .map(|c| SweepRow {
                mass: c.mass,
                friction: c.friction,
                mean: c.stats.mean,
                std: c.stats.std,
                cvar: c.stats.risk.cvar,
                episodes: c.stats.episodes,
            })
            .collect()
    }

    pub fn cell(&self, mass: f64, friction: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.mass == mass && c.friction == friction)
    }
}

fn check_values(name: &'static str, values: &[f64], allow_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(name, "empty grid"));
    }
    for &v in values {
        let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
        if !ok {
            return Err(invalid(name, format!("grid value {v}")));
        }
    }
    Ok(())
}

fn physics(env: &EnvDescriptor) -> Result<EnvPhysicsParams> {
    env.physics().copied().ok_or(Error::Unsupported {
        env: "tabular",
        what: "physics sweeps",
    })
}

#[allow(clippy::too_many_arguments)]
fn run_grid(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    axis1: Axis,
    axis2: Option<Axis>,
    points: Vec<(f64, f64)>,
    n_episodes: usize,
    seed_base: u64,
    alpha: f64,
) -> Result<SweepGrid> {
    let nominal = physics(env)?;
    let mut cells = Vec::with_capacity(points.len());
    for (mass, friction) in points {
        let cell_env = env.with_physics(EnvPhysicsParams {
            mass,
            friction,
            ..nominal
        })?;
        let stats = evaluate(&cell_env, policy, params, n_episodes, EvalAdversary::None, seed_base, alpha)?;
        cells.push(SweepCell { mass, friction, stats });
    }
    Ok(SweepGrid {
        axis1,
        axis2,
        episodes: n_episodes,
        seed_base,
        cells,
    })
}

/// Disturbance-free returns as the pole (pendulum) or body (slider) mass varies.
pub fn mass_sweep(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    masses: &[f64],
    n_episodes: usize,
    seed_base: u64,
    alpha: f64,
) -> Result<SweepGrid> {
    check_values("mass", masses, false)?;
    let friction = physics(env)?.friction;
    let points = masses.iter().map(|&m| (m, friction)).collect();
    let axis = Axis {
        name: "mass".into(),
        values: masses.to_vec(),
    };
    run_grid(env, policy, params, axis, None, points, n_episodes, seed_base, alpha)
}

fn require_slider(env: &EnvDescriptor, what: &'static str) -> Result<()> {
    match env.kind() {
        EnvKind::Slider => Ok(()),
        other => Err(Error::Unsupported { env: other.name(), what }),
    }
}

/// Disturbance-free returns as the floor friction varies. Slider only.
pub fn friction_sweep(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    frictions: &[f64],
    n_episodes: usize,
    seed_base: u64,
    alpha: f64,
) -> Result<SweepGrid> {
    require_slider(env, "friction sweep")?;
    check_values("friction", frictions, true)?;
    let mass = physics(env)?.mass;
    let points = frictions.iter().map(|&f| (mass, f)).collect();
    let axis = Axis {
        name: "friction".into(),
        values: frictions.to_vec(),
    };
    run_grid(env, policy, params, axis, None, points, n_episodes, seed_base, alpha)
}

/// Full mass x friction grid. Slider only.
#[allow(clippy::too_many_arguments)]
pub fn joint_sweep(
    env: &EnvDescriptor,
    policy: &dyn StochasticPolicy,
    params: &[f64],
    masses: &[f64],
    frictions: &[f64],
    n_episodes: usize,
    seed_base: u64,
    alpha: f64,
) -> Result<SweepGrid> {
    require_slider(env, "joint sweep")?;
    check_values("mass", masses, false)?;
    check_values("friction", frictions, true)?;
    let points = masses
        .iter()
        .flat_map(|&m| frictions.iter().map(move |&f| (m, f)))
        .collect();
    let axis1 = Axis {
        name: "mass".into(),
        values: masses.to_vec(),
    };
    let axis2 = Axis {
        name: "friction".into(),
        values: frictions.to_vec(),
    };
    run_grid(env, policy, params, axis1, Some(axis2), points, n_episodes, seed_base, alpha)
}

/// Cell-wise `a - b` of mean and CVaR. Both grids must cover the same cells in the same
/// order.
pub fn difference_grid(a: &SweepGrid, b: &SweepGrid) -> Result<Vec<DifferenceRow>> {
    if a.cells.len() != b.cells.len() {
        return Err(Error::DimensionMismatch {
            context: "sweep cells",
            expected: a.cells.len(),
            actual: b.cells.len(),
        });
    }
    a.cells
        .iter()
        .zip(&b.cells)
        .map(|(x, y)| {
            if x.mass != y.mass || x.friction != y.friction {
                return Err(invalid(
                    "sweep grid",
                    format!("cell ({}, {}) vs ({}, {})", x.mass, x.friction, y.mass, y.friction),
                ));
            }
            Ok(DifferenceRow {
                mass: x.mass,
                friction: x.friction,
                mean_diff: x.stats.mean - y.stats.mean,
                cvar_diff: x.stats.risk.cvar - y.stats.risk.cvar,
            })
        })
        .collect()
}
