use crate::env::{clamp_action, Bounds, EnvSpec, Transition, ZeroSumEnv};
use crate::error::{check_dim, Error, Result};

use super::{uniform_box, EnvPhysicsParams};

/// Viscous drag per unit friction coefficient, N s/m. Zero friction means no drag at all.
pub const VISCOUS_PER_FRICTION: f64 = 20.0;

/// Quadratic penalty on the protagonist's (clamped) drive force.
pub const CONTROL_COST: f64 = 0.01;

/// Point mass on a floor with Coulomb plus viscous friction.
///
/// Observation is `(x, v)`. Reward is `v' - 0.01 a1^2`: forward velocity after the step
/// minus a control cost. This shaping is a stand-in for locomotion rewards and has no
/// deeper meaning. Episodes never terminate early.
#[derive(Debug, Clone)]
pub struct FrictionSlider {
    params: EnvPhysicsParams,
    spec: EnvSpec,
    state: [f64; 2],
    clock: usize,
    done: bool,
}

impl FrictionSlider {
    pub fn new(params: EnvPhysicsParams) -> Result<Self> {
        params.validate()?;
        let spec = EnvSpec {
            obs_dim: 2,
            act1_dim: 1,
            act2_dim: 1,
            act1_bounds: vec![Bounds::symmetric(params.protagonist_force_cap)],
            act2_bounds: vec![Bounds::symmetric(params.adversary_force_cap)],
            horizon: params.horizon,
            discount: params.discount,
        };
        spec.validate()?;
        Ok(FrictionSlider {
            params,
            spec,
            state: [0.0; 2],
            clock: 0,
            done: false,
        })
    }

    pub fn set_state(&mut self, state: [f64; 2]) {
        self.state = state;
        self.clock = 0;
        self.done = false;
    }

    /// One semi-implicit Euler step with impulse-style Coulomb friction that can stop
    /// the body but never reverse it.
    pub fn integrate(&self, s: [f64; 2], force: f64) -> [f64; 2] {
        let p = &self.params;
        let drag = p.friction * VISCOUS_PER_FRICTION * s[1];
        let v_free = s[1] + p.dt * (force - drag) / p.mass;
        let coulomb_dv = p.dt * p.friction * p.gravity;
        let v = if v_free.abs() <= coulomb_dv {
            0.0
        } else {
            v_free - coulomb_dv.copysign(v_free)
        };
        [s[0] + p.dt * v, v]
    }
}

impl ZeroSumEnv for FrictionSlider {
    fn name(&self) -> &'static str {
        "slider"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let s = uniform_box(seed, &[0.05, 0.05]);
        self.state = [s[0], s[1]];
        self.clock = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action1: &[f64], action2: &[f64]) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        check_dim("slider action1", 1, action1.len())?;
        check_dim("slider action2", 1, action2.len())?;
        let a1 = clamp_action(&self.spec.act1_bounds, action1)[0];
        let a2 = clamp_action(&self.spec.act2_bounds, action2)[0];
        let next = self.integrate(self.state, a1 + a2);
        self.state = next;
        self.clock += 1;
        let reward = next[1] - CONTROL_COST * a1 * a1;
        let truncated = self.clock >= self.params.horizon;
        self.done = truncated;
        Ok(Transition {
            next_state: next.to_vec(),
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
    fn frictionless_constant_force_matches_closed_form() {
        let params = EnvPhysicsParams {
            friction: 0.0,
            adversary_force_cap: 0.0,
            ..EnvPhysicsParams::slider()
        };
        let mut env = FrictionSlider::new(params).unwrap();
        env.set_state([0.0, 0.0]);
        let force = 2.0;
        let accel = force / params.mass;
        for n in 1..=params.horizon {
            let tr = env.step(&[force], &[0.7]).unwrap();
            let v_closed = n as f64 * params.dt * accel;
            // x_n = dt^2 a n (n + 1) / 2 for the velocity-first update.
            let x_closed = params.dt * params.dt * accel * (n * (n + 1)) as f64 / 2.0;
            assert!((tr.next_state[1] - v_closed).abs() < 1e-12 * (1.0 + v_closed));
            assert!((tr.next_state[0] - x_closed).abs() < 1e-10 * (1.0 + x_closed));
            assert_eq!(tr.done(), n == params.horizon);
        }
    }

    #[test]
    fn statics_give_zero_reward() {
        let mut env = FrictionSlider::new(EnvPhysicsParams::slider()).unwrap();
        env.set_state([0.3, 0.0]);
        for _ in 0..100 {
            let tr = env.step(&[0.0], &[0.0]).unwrap();
            assert_eq!(tr.reward1, 0.0);
            assert_eq!(tr.next_state, vec![0.3, 0.0]);
        }
    }

    #[test]
    fn coulomb_friction_holds_small_forces() {
        let p = EnvPhysicsParams::slider();
        let mut env = FrictionSlider::new(p).unwrap();
        env.set_state([0.0, 0.0]);
        let below = 0.9 * p.friction * p.mass * p.gravity;
        let tr = env.step(&[below], &[0.0]).unwrap();
        assert_eq!(tr.next_state[1], 0.0);
    }

    #[test]
    fn zero_cap_ignores_adversary() {
        let p = EnvPhysicsParams {
            adversary_force_cap: 0.0,
            ..EnvPhysicsParams::slider()
        };
        let mut a = FrictionSlider::new(p).unwrap();
        let mut b = FrictionSlider::new(p).unwrap();
        a.reset(9);
        b.reset(9);
        for k in 0..p.horizon {
            let f = (k as f64 * 0.37).sin() * 6.0;
            assert_eq!(a.step(&[f], &[100.0]).unwrap(), b.step(&[f], &[-3.0]).unwrap());
        }
    }
}
