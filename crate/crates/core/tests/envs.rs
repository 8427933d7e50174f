use std::sync::Arc;

use proptest::prelude::*;

use rarl_core::envs::{decode_state, make_tabular_game};
use rarl_core::{EnvDescriptor, EnvPhysicsParams, ZeroSumEnv};

fn descriptors(game_seed: u64) -> Vec<EnvDescriptor> {
    vec![
        EnvDescriptor::Pendulum(EnvPhysicsParams::pendulum()),
        EnvDescriptor::Slider(EnvPhysicsParams::slider()),
        EnvDescriptor::Tabular {
            game: Arc::new(make_tabular_game(game_seed, 4, 3, 3).unwrap()),
            horizon: 50,
            adversary_enabled: true,
        },
    ]
}

/// Map a raw draw in [-1, 1] to an action for `env`: up to twice the cap for physics
/// envs, an action index for the tabular game.
fn action(env: &dyn ZeroSumEnv, player: usize, raw: f64) -> Vec<f64> {
    let spec = env.spec();
    let bounds = if player == 0 { &spec.act1_bounds } else { &spec.act2_bounds };
    if env.name() == "tabular" {
        let n = bounds[0].hi as usize + 1;
        vec![((raw + 1.0) / 2.0 * n as f64).floor().min(n as f64 - 1.0)]
    } else {
        bounds.iter().map(|b| 2.0 * raw * b.hi.max(1.0)).collect()
    }
}

fn play(d: &EnvDescriptor, seed: u64, raw: &[(f64, f64)]) -> Vec<(Vec<f64>, f64, f64, bool)> {
    let mut env = d.build().unwrap();
    let mut out = Vec::new();
    let mut s = env.reset(seed);
    for &(r1, r2) in raw {
        let a1 = action(env.as_ref(), 0, r1);
        let a2 = action(env.as_ref(), 1, r2);
        let tr = env.step(&a1, &a2).unwrap();
        out.push((s, tr.reward1, tr.reward2, tr.done()));
        if tr.done() {
            break;
        }
        s = tr.next_state;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rewards_are_exactly_zero_sum(seed in any::<u64>(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..120)) {
        for d in descriptors(seed % 7) {
            for (state, r1, r2, _) in play(&d, seed, &raw) {
                prop_assert_eq!(r1, -r2);
                prop_assert!(r1.is_finite());
                prop_assert!(state.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn episodes_are_deterministic_given_seed(seed in any::<u64>(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..80)) {
        for d in descriptors(seed % 5) {
            prop_assert_eq!(play(&d, seed, &raw), play(&d, seed, &raw));
        }
    }

    #[test]
    fn over_cap_actions_act_like_capped_ones(seed in any::<u64>(), raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..60)) {
        for d in descriptors(0).into_iter().take(2) {
            let mut a = d.build().unwrap();
            let mut b = d.build().unwrap();
            a.reset(seed);
            b.reset(seed);
            for &(r1, r2) in &raw {
                let x1 = action(a.as_ref(), 0, r1);
                let x2 = action(a.as_ref(), 1, r2);
                let spec = a.spec().clone();
                let c1: Vec<f64> = x1.iter().zip(&spec.act1_bounds).map(|(x, bd)| x.clamp(bd.lo, bd.hi)).collect();
                let c2: Vec<f64> = x2.iter().zip(&spec.act2_bounds).map(|(x, bd)| x.clamp(bd.lo, bd.hi)).collect();
                let ta = a.step(&x1, &x2).unwrap();
                let tb = b.step(&c1, &c2).unwrap();
                prop_assert_eq!(&ta, &tb);
                if ta.done() {
                    break;
                }
            }
        }
    }
}

#[test]
fn tabular_states_are_one_hot_and_valid() {
    let d = &descriptors(3)[2];
    let raw: Vec<(f64, f64)> = (0..50).map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
    for (s, _, _, _) in play(d, 11, &raw) {
        let k = decode_state(&s);
        assert!(k < 4);
        assert_eq!(s.iter().sum::<f64>(), 1.0);
        assert_eq!(s[k], 1.0);
    }
}

#[test]
fn slider_friction_slows_a_driven_body() {
    // Same drive force; more friction means less distance covered.
    let drive = |friction: f64| {
        let d = EnvDescriptor::Slider(EnvPhysicsParams {
            friction,
            ..EnvPhysicsParams::slider()
        });
        let mut env = d.build().unwrap();
        let mut s = env.reset(1);
        let mut total = 0.0;
        for _ in 0..200 {
            let tr = env.step(&[3.0], &[0.0]).unwrap();
            total += tr.reward1;
            s = tr.next_state;
        }
        (total, s[0])
    };
    let mut last = (f64::INFINITY, f64::INFINITY);
    for f in [0.0, 0.02, 0.05, 0.08] {
        let now = drive(f);
        assert!(now.0 < last.0 && now.1 < last.1, "friction {f}: {now:?} after {last:?}");
        last = now;
    }
    // Static friction above the drive force holds the body in place.
    let stuck = drive(0.2);
    assert!(stuck.0 <= last.0 && stuck.1.abs() < 0.05);
}
