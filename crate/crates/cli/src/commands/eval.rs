use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rarl_core::eval::{
    default_force_states, difference_grid, evaluate, force_field_export, force_plot_script, friction_sweep,
    heatmap_plot_script, joint_sweep, mass_sweep, percentile_curve, percentile_plot_script, sweep_plot_script,
    write_difference_csv, write_force_csv, write_percentile_csv, write_sweep_csv, EvalAdversary, EvalStats,
    SweepGrid,
};
use rarl_core::policy::{write_checkpoint, Checkpoint, CheckpointEntry};
use rarl_core::trainer::train_adversary_only;
use rarl_core::{EnvKind, PolicyParams, StochasticPolicy};

use super::load_config;
use crate::config::ExperimentConfig;
use crate::run::{RunDir, CONFIG};
use crate::{EvalArgs, SweepKind, UsageError};

pub const SUMMARY_HEADER: &str = "condition,mean,std,quantile,cvar,episodes";

pub fn summary_csv(rows: &[(&str, &EvalStats)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{name},{:?},{:?},{:?},{:?},{}",
            s.mean, s.std, s.risk.quantile, s.risk.cvar, s.episodes
        );
    }
    out
}

/// A trained run: resolved config plus final policies.
struct LoadedRun {
    config: ExperimentConfig,
    mu: Box<dyn StochasticPolicy>,
    theta_mu: PolicyParams,
    nu: Box<dyn StochasticPolicy>,
    theta_nu: PolicyParams,
}

fn load_run(dir: &Path, overrides: &[String]) -> Result<LoadedRun> {
    let rd = RunDir::open(dir)?;
    for o in overrides {
        if !o.trim_start().starts_with("eval.") {
            bail!(UsageError(format!("eval accepts only eval.* overrides, found `{o}`")));
        }
    }
    let config = load_config(Some(&rd.path(CONFIG)), overrides)?;
    let ckpt = rd.final_checkpoint(config.n_iter)?;
    let [mu, nu] = <[CheckpointEntry; 2]>::try_from(ckpt.policies)
        .map_err(|_| anyhow::anyhow!("final checkpoint of {} must hold two policies", dir.display()))?;
    Ok(LoadedRun {
        config,
        mu: mu.arch.build(),
        theta_mu: mu.params,
        nu: nu.arch.build(),
        theta_nu: nu.params,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

pub fn run(args: &EvalArgs) -> Result<()> {
    if args.percentiles {
        return percentiles(args);
    }
    if !args.runs.is_empty() {
        bail!(UsageError("--runs is only used with --percentiles".into()));
    }
    let dir = args
        .run
        .as_deref()
        .ok_or_else(|| UsageError("eval needs a run directory".into()))?;
    let run = load_run(dir, &args.overrides)?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => RunDir::open(dir)?.eval_dir()?,
    };
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let nothing_selected = args.sweep.is_empty() && !args.attack && !args.force_field;
    if nothing_selected {
        summary(&run, &out)?;
    }
    let compare = match &args.compare {
        Some(c) => Some(load_run(c, &args.overrides)?),
        None => None,
    };
    for kind in &args.sweep {
        sweep(&run, compare.as_ref(), *kind, &out)?;
    }
    if args.attack {
        attack(&run, &out)?;
    }
    if args.force_field {
        force_field(&run, &out)?;
    }
    println!("{}", out.display());
    Ok(())
}

fn clean_stats(run: &LoadedRun) -> Result<EvalStats> {
    let e = &run.config.eval;
    let env = run.config.env_descriptor()?;
    Ok(evaluate(&env, run.mu.as_ref(), &run.theta_mu, e.episodes, EvalAdversary::None, e.seed, e.alpha)?)
}

/// Protagonist returns with no adversary, a uniform random adversary and the trained one.
fn summary(run: &LoadedRun, out: &Path) -> Result<()> {
    let e = &run.config.eval;
    let env = run.config.env_descriptor()?;
    let go = |adv| evaluate(&env, run.mu.as_ref(), &run.theta_mu, e.episodes, adv, e.seed, e.alpha);
    let none = go(EvalAdversary::None)?;
    let random = go(EvalAdversary::Random)?;
    let trained = go(EvalAdversary::Policy {
        policy: run.nu.as_ref(),
        params: &run.theta_nu,
    })?;
    write(
        out,
        "summary.csv",
        &summary_csv(&[("none", &none), ("random", &random), ("trained", &trained)]),
    )?;
    let mut returns = String::from("episode,none,random,trained\n");
    for i in 0..none.episodes {
        let _ = writeln!(returns, "{i},{:?},{:?},{:?}", none.returns[i], random.returns[i], trained.returns[i]);
    }
    write(out, "returns.csv", &returns)
}

fn grid_for(run: &LoadedRun, kind: SweepKind) -> Result<SweepGrid> {
    let c = &run.config;
    let e = &c.eval;
    let env = c.env_descriptor()?;
    let (p, t) = (run.mu.as_ref(), &run.theta_mu[..]);
    Ok(match kind {
        SweepKind::Mass => mass_sweep(&env, p, t, &e.mass_values, e.episodes, e.seed, e.alpha)?,
        SweepKind::Friction => friction_sweep(&env, p, t, &e.friction_values, e.episodes, e.seed, e.alpha)?,
        SweepKind::Joint => joint_sweep(&env, p, t, &e.mass_values, &e.friction_values, e.episodes, e.seed, e.alpha)?,
    })
}

fn grid_meta(g: &SweepGrid, alpha: f64) -> Vec<String> {
    let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut m = vec![format!("{}: {}", g.axis1.name, fmt(&g.axis1.values))];
    if let Some(a) = &g.axis2 {
        m.push(format!("{}: {}", a.name, fmt(&a.values)));
    }
    m.push(format!("episodes: {} seed: {} alpha: {alpha}", g.episodes, g.seed_base));
    m
}

fn sweep(run: &LoadedRun, compare: Option<&LoadedRun>, kind: SweepKind, out: &Path) -> Result<()> {
    if kind != SweepKind::Mass && run.config.env != EnvKind::Slider {
        bail!(UsageError(format!(
            "{} sweeps need the slider environment; friction is irrelevant to `{}`",
            if kind == SweepKind::Friction { "friction" } else { "joint" },
            run.config.env.name()
        )));
    }
    let name = match kind {
        SweepKind::Mass => "mass_sweep",
        SweepKind::Friction => "friction_sweep",
        SweepKind::Joint => "joint_sweep",
    };
    let alpha = run.config.eval.alpha;
    let grid = grid_for(run, kind)?;
    write(out, &format!("{name}.csv"), &write_sweep_csv(&grid.rows(), &grid_meta(&grid, alpha)))?;
    let mut curves = vec![("run", format!("{name}.csv"))];
    if let Some(other) = compare {
        if other.config.env != run.config.env {
            bail!(UsageError("--compare needs a run on the same environment".into()));
        }
        // The comparison run is evaluated on this run's grid and seeds.
        let other = LoadedRun {
            config: run.config.clone(),
            mu: other.mu.arch().build(),
            theta_mu: other.theta_mu.clone(),
            nu: other.nu.arch().build(),
            theta_nu: other.theta_nu.clone(),
        };
        let og = grid_for(&other, kind)?;
        write(out, &format!("{name}_compare.csv"), &write_sweep_csv(&og.rows(), &grid_meta(&og, alpha)))?;
        let diff = difference_grid(&grid, &og)?;
        write(
            out,
            &format!("{name}_diff.csv"),
            &write_difference_csv(&diff, &["run minus compare".to_string()]),
        )?;
        curves.push(("compare", format!("{name}_compare.csv")));
        if kind == SweepKind::Joint {
            write(out, &format!("{name}_diff.gp"), &heatmap_plot_script(&format!("{name}_diff.csv"), 3, &format!("{name}_diff.png")))?;
        }
    }
    let script = if kind == SweepKind::Joint {
        heatmap_plot_script(&format!("{name}.csv"), 3, &format!("{name}.png"))
    } else {
        let refs: Vec<(&str, &str)> = curves.iter().map(|(l, c)| (*l, c.as_str())).collect();
        let axis = if kind == SweepKind::Mass { "mass" } else { "friction" };
        sweep_plot_script(&refs, axis, &format!("{name}.png"))
    };
    write(out, &format!("{name}.gp"), &script)
}

/// Train a fresh adversary against the frozen protagonist, then compare clean, random
/// and attacked returns on the same evaluation seeds.
fn attack(run: &LoadedRun, out: &Path) -> Result<()> {
    let c = &run.config;
    let e = &c.eval;
    let mut tc = c.train_config()?;
    tc.n_iter = e.attack_iters;
    tc.n_traj = e.attack_n_traj;
    tc.n_nu = 1;
    let attack = train_adversary_only(&tc, &run.theta_mu)?;
    let env = c.env_descriptor()?;
    let go = |adv| evaluate(&env, run.mu.as_ref(), &run.theta_mu, e.episodes, adv, e.seed, e.alpha);
    let clean = go(EvalAdversary::None)?;
    let random = go(EvalAdversary::Random)?;
    let attacked = go(EvalAdversary::Policy {
        policy: run.nu.arch().build().as_ref(),
        params: &attack.theta_nu,
    })?;
    write(
        out,
        "attack.csv",
        &summary_csv(&[("clean", &clean), ("random", &random), ("attacked", &attacked)]),
    )?;
    let mut hist = String::from("iteration,mean_return1,mean_return2\n");
    for h in &attack.history {
        let _ = writeln!(hist, "{},{:?},{:?}", h.iteration, h.mean_return1, h.mean_return2);
    }
    write(out, "attack_history.csv", &hist)?;
    let ckpt = Checkpoint {
        seed: c.seed,
        iteration: e.attack_iters as u64,
        policies: vec![
            CheckpointEntry {
                arch: run.mu.arch(),
                params: run.theta_mu.clone(),
            },
            CheckpointEntry {
                arch: run.nu.arch(),
                params: attack.theta_nu,
            },
        ],
    };
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &ckpt)?;
    let p = out.join("attack_adversary.bin");
    fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))
}

fn force_field(run: &LoadedRun, out: &Path) -> Result<()> {
    let env = run.config.env_descriptor()?;
    let states = default_force_states(&env)?;
    let records = force_field_export(&env, run.nu.as_ref(), &run.theta_nu, &states)?;
    let meta = vec![format!("adversary_force_cap: {}", run.config.physics.adversary_force_cap)];
    write(out, "force_field.csv", &write_force_csv(&records, &meta))?;
    let script = match run.config.env {
        // Pole angle against cart velocity, arrows (f_x, f_y).
        EnvKind::Pendulum => force_plot_script("force_field.csv", 3, 2, 5, 6, "force_field.png"),
        _ => force_plot_script("force_field.csv", 2, 1, 3, 0, "force_field.png"),
    };
    write(out, "force_field.gp", &script)
}

/// Mean clean return of each run's final protagonist, summarized as a percentile curve.
fn percentiles(args: &EvalArgs) -> Result<()> {
    if args.runs.len() < 2 {
        bail!(UsageError("--percentiles needs at least two --runs".into()));
    }
    let out: PathBuf = args
        .out
        .clone()
        .ok_or_else(|| UsageError("--percentiles needs --out".into()))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut rewards = Vec::with_capacity(args.runs.len());
    let mut listing = String::from("run,reward\n");
    for dir in &args.runs {
        let run = load_run(dir, &args.overrides)?;
        let r = clean_stats(&run)?.mean;
        let _ = writeln!(listing, "{},{r:?}", dir.display());
        rewards.push(r);
    }
    let curve = percentile_curve(&rewards)?;
    write(&out, "final_rewards.csv", &listing)?;
    write(
        &out,
        "percentiles.csv",
        &write_percentile_csv(&curve, &[format!("runs: {}", rewards.len())]),
    )?;
    write(
        &out,
        "percentiles.gp",
        &percentile_plot_script(&[("runs", "percentiles.csv")], "percentiles.png"),
    )?;
    println!("{}", out.display());
    Ok(())
}
