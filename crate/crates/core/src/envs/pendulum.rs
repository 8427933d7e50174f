use crate::env::{clamp_action, Bounds, EnvSpec, Transition, ZeroSumEnv};
use crate::error::{check_dim, Error, Result};

use super::{uniform_box, EnvPhysicsParams};

/// Distance from the pivot to the pole's centre of mass, m. The pole is a uniform rod.
pub const POLE_HALF_LENGTH: f64 = 0.5;

/// Start states are drawn uniformly from `[-0.05, 0.05]` in every coordinate.
pub const INIT_BOX: f64 = 0.05;

const THETA_LIMIT: f64 = 0.2;
const X_LIMIT: f64 = 2.4;

/// `(x, x_dot, theta, theta_dot)`; `theta` is measured from upright, positive when the
/// pole leans towards `+x`.
pub type PendulumState = [f64; 4];

/// Cart-pole with the adversary's force `(f_x, f_y)` applied at the pole's centre of mass.
///
/// Equations of motion come from the Lagrangian in generalized coordinates `(x, theta)`,
/// so the rail reaction absorbs any vertical component on the cart. The external force at
/// the pole centre `(x + l sin theta, l cos theta)` maps to the generalized forces
/// `Q_x = F + f_x` and `Q_theta = l (f_x cos theta - f_y sin theta)`.
#[derive(Debug, Clone)]
pub struct InvertedPendulum {
    params: EnvPhysicsParams,
    spec: EnvSpec,
    state: PendulumState,
    clock: usize,
    done: bool,
}

impl InvertedPendulum {
    pub fn new(params: EnvPhysicsParams) -> Result<Self> {
        params.validate()?;
        if params.cart_mass <= 0.0 {
            return Err(crate::error::invalid("cart_mass", "pendulum needs a positive cart mass"));
        }
        let spec = EnvSpec {
            obs_dim: 4,
            act1_dim: 1,
            act2_dim: 2,
            act1_bounds: vec![Bounds::symmetric(params.protagonist_force_cap)],
            act2_bounds: vec![Bounds::symmetric(params.adversary_force_cap); 2],
            horizon: params.horizon,
            discount: params.discount,
        };
        spec.validate()?;
        Ok(InvertedPendulum {
            params,
            spec,
            state: [0.0; 4],
            clock: 0,
            done: false,
        })
    }

    pub fn params(&self) -> &EnvPhysicsParams {
        &self.params
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    /// Place the system in an arbitrary state and restart the episode clock.
    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
        self.clock = 0;
        self.done = false;
    }

    /// `(x_ddot, theta_ddot)` for the given state and (already clamped) forces.
    pub fn accelerations(&self, s: &PendulumState, cart_force: f64, adv: [f64; 2]) -> (f64, f64) {
        let p = &self.params;
        let (m, big_m, l, g) = (p.mass, p.cart_mass, POLE_HALF_LENGTH, p.gravity);
        let inertia = m * l * l / 3.0;
        let (sin, cos) = s[2].sin_cos();
        let theta_dot = s[3];

        let q_x = cart_force + adv[0];
        let q_theta = l * (adv[0] * cos - adv[1] * sin);

        // [M+m      m l cos ] [x_ddot    ]   [Q_x + m l sin theta_dot^2]
        // [m l cos  I + m l^2] [theta_ddot] = [Q_theta + m g l sin       ]
        let a11 = big_m + m;
        let a12 = m * l * cos;
        let a22 = inertia + m * l * l;
        let b1 = q_x + m * l * sin * theta_dot * theta_dot;
        let b2 = q_theta + m * g * l * sin;
        let det = a11 * a22 - a12 * a12;
        ((b1 * a22 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    }

    /// One semi-implicit Euler step of the raw dynamics (no termination, no clamping).
    pub fn integrate(&self, s: &PendulumState, cart_force: f64, adv: [f64; 2], dt: f64) -> PendulumState {
        let (x_acc, th_acc) = self.accelerations(s, cart_force, adv);
        let x_dot = s[1] + dt * x_acc;
        let th_dot = s[3] + dt * th_acc;
        [s[0] + dt * x_dot, x_dot, s[2] + dt * th_dot, th_dot]
    }
}

/// Total mechanical energy with the potential measured from the pivot height.
pub fn pendulum_energy(params: &EnvPhysicsParams, s: &PendulumState) -> f64 {
    let (m, big_m, l, g) = (params.mass, params.cart_mass, POLE_HALF_LENGTH, params.gravity);
    let inertia = m * l * l / 3.0;
    let cos = s[2].cos();
    0.5 * (big_m + m) * s[1] * s[1]
        + m * l * cos * s[1] * s[3]
        + 0.5 * (inertia + m * l * l) * s[3] * s[3]
        + m * g * l * cos
}

impl ZeroSumEnv for InvertedPendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let s = uniform_box(seed, &[INIT_BOX; 4]);
        self.state = [s[0], s[1], s[2], s[3]];
        self.clock = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action1: &[f64], action2: &[f64]) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        check_dim("pendulum action1", 1, action1.len())?;
        check_dim("pendulum action2", 2, action2.len())?;
        let a1 = clamp_action(&self.spec.act1_bounds, action1);
        let a2 = clamp_action(&self.spec.act2_bounds, action2);

        let next = self.integrate(&self.state, a1[0], [a2[0], a2[1]], self.params.dt);
        self.state = next;
        self.clock += 1;

        let alive = next[2].abs() < THETA_LIMIT && next[0].abs() < X_LIMIT;
        let reward = if alive { 1.0 } else { 0.0 };
        let truncated = alive && self.clock >= self.params.horizon;
        self.done = !alive || truncated;
        Ok(Transition {
            next_state: next.to_vec(),
            reward1: reward,
            reward2: -reward,
            terminal: !alive,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> InvertedPendulum {
        InvertedPendulum::new(EnvPhysicsParams::pendulum()).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_in_box() {
        let mut e = env();
        for seed in 0..50 {
            let a = e.reset(seed);
            let b = e.reset(seed);
            assert_eq!(a, b);
            assert!(a.iter().all(|v| v.abs() <= INIT_BOX));
        }
    }

    #[test]
    fn upright_rest_is_an_equilibrium() {
        let mut e = env();
        e.set_state([0.0; 4]);
        let tr = e.step(&[0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(tr.reward1, 1.0);
        assert_eq!(tr.reward2, -1.0);
        assert_eq!(tr.next_state, vec![0.0; 4]);
        for _ in 0..500 {
            let tr = e.step(&[0.0], &[0.0, 0.0]).unwrap();
            assert_eq!(tr.next_state[2], 0.0);
        }
    }

    #[test]
    fn sustained_lateral_push_topples_pole() {
        let mut e = env();
        e.set_state([0.0; 4]);
        let cap = e.params().adversary_force_cap;
        let mut steps = 0;
        loop {
            steps += 1;
            let tr = e.step(&[0.0], &[cap, 0.0]).unwrap();
            if tr.terminal {
                assert_eq!(tr.reward1, 0.0);
                break;
            }
            assert!(steps < 1000, "pole never fell");
        }
        assert!(matches!(e.step(&[0.0], &[0.0, 0.0]), Err(Error::EpisodeTerminated)));
    }

    #[test]
    fn over_cap_adversary_is_clamped() {
        let mut a = env();
        let mut b = env();
        a.reset(3);
        b.reset(3);
        let ta = a.step(&[0.3], &[50.0, -50.0]).unwrap();
        let tb = b.step(&[0.3], &[2.0, -2.0]).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn vertical_force_does_not_move_cart_when_upright() {
        let e = env();
        let (x_acc, th_acc) = e.accelerations(&[0.0; 4], 0.0, [0.0, 2.0]);
        assert_eq!(x_acc, 0.0);
        assert_eq!(th_acc, 0.0);
    }

    fn max_energy_drift(theta0: f64, dt: f64, steps: usize) -> f64 {
        let params = EnvPhysicsParams {
            dt,
            ..EnvPhysicsParams::pendulum()
        };
        let e = InvertedPendulum::new(params).unwrap();
        let mut s = [0.0, 0.0, theta0, 0.0];
        let e0 = pendulum_energy(&params, &s);
        let mut worst: f64 = 0.0;
        for _ in 0..steps {
            s = e.integrate(&s, 0.0, [0.0, 0.0], dt);
            worst = worst.max(((pendulum_energy(&params, &s) - e0) / e0).abs());
        }
        worst
    }

    #[test]
    fn zero_forces_conserve_energy() {
        // Small swing about the hanging equilibrium, no termination, dt = 0.01, 1000 steps.
        let worst = max_energy_drift(std::f64::consts::PI - 0.05, 0.01, 1000);
        assert!(worst < 1e-3, "relative energy drift {worst}");
    }

    #[test]
    fn energy_error_is_first_order_in_dt() {
        // A full fall from near upright over the same 10 s of simulated time.
        let coarse = max_energy_drift(0.05, 0.01, 1000);
        let fine = max_energy_drift(0.05, 0.005, 2000);
        let ratio = coarse / fine;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
    }
}
