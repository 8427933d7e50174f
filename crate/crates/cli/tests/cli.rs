use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rarl"))
        .args(args)
        .output()
        .expect("spawn rarl")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: [&str; 6] = [
    "--set",
    "train.n_iter=2",
    "--set",
    "train.n_traj=3",
    "--set",
    "train.hidden=8,8",
];

fn train_tiny(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(&TINY);
    args.extend_from_slice(extra);
    rarl(&args)
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(code(&rarl(&["--help"])), 0);
    assert_eq!(code(&rarl(&["train", "--help"])), 0);
    assert_eq!(code(&rarl(&["train", "--no-such-flag"])), 1);
    assert_eq!(code(&rarl(&[])), 1);
}

#[test]
fn config_errors_are_usage_errors_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "[env]\nname = pendulum\n\n[train]\nn_itr = 3\n").unwrap();
    let o = rarl(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    fs::write(&cfg, "[env]\nname = pendulum\nfriction = 0.1\n").unwrap();
    let o = rarl(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = train_tiny(&tmp.path().join("r"), &["--set", "eval.alpha=1.5"]);
    assert_eq!(code(&o), 1);
    let o = rarl(&["train", "--config", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_writes_run_directory_and_needs_force_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = train_tiny(&dir, &["--set", "protagonist.kl_delta=0.005"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["manifest.json", "config.resolved", "stats.csv", "timing.csv", "checkpoints/iter_000002.bin"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let resolved = fs::read_to_string(dir.join("config.resolved")).unwrap();
    assert!(resolved.contains("kl_delta = 0.005"), "{resolved}");
    assert!(resolved.contains("n_iter = 2"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_iter"], 2);
    assert_eq!(manifest["mode"], "rarl");
    assert_eq!(manifest["final_checkpoint"], "checkpoints/iter_000002.bin");

    // Two iterations with one update per player each.
    let stats = fs::read_to_string(dir.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 4);

    assert_eq!(code(&train_tiny(&dir, &[])), 1);
    assert_eq!(code(&train_tiny(&dir, &["--force"])), 0);
}

#[test]
fn seeds_flag_writes_one_directory_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_tiny(tmp.path(), &["--seeds", "2", "--seed", "7", "--baseline"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for s in ["seed7", "seed8"] {
        let m = fs::read_to_string(tmp.path().join(s).join("manifest.json")).unwrap();
        assert!(m.contains("\"baseline\""));
    }
    let a = fs::read_to_string(tmp.path().join("seed7/stats.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("seed8/stats.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn training_is_repeatable_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&train_tiny(&a, &["--threads", "1"])), 0);
    assert_eq!(code(&train_tiny(&b, &["--threads", "4"])), 0);
    for f in ["stats.csv", "config.resolved", "checkpoints/iter_000002.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn eval_summary_and_restrictions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert_eq!(code(&train_tiny(&dir, &[])), 0);

    let o = rarl(&["eval", dir.to_str().unwrap(), "--set", "eval.episodes=4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.join("eval/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "condition,mean,std,quantile,cvar,episodes");
    assert!(lines[1].starts_with("none,") && lines[2].starts_with("random,") && lines[3].starts_with("trained,"));

    // Only eval.* keys may change at evaluation time.
    assert_eq!(code(&rarl(&["eval", dir.to_str().unwrap(), "--set", "train.n_iter=3"])), 1);
    // Friction is meaningless on the pendulum.
    assert_eq!(code(&rarl(&["eval", dir.to_str().unwrap(), "--sweep", "friction"])), 1);
    assert_eq!(code(&rarl(&["eval", tmp.path().join("nothing").to_str().unwrap()])), 1);

    let o = rarl(&[
        "eval",
        dir.to_str().unwrap(),
        "--sweep",
        "mass",
        "--set",
        "eval.episodes=2",
        "--set",
        "eval.mass_values=4,5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep = fs::read_to_string(dir.join("eval/mass_sweep.csv")).unwrap();
    let rows = rarl_core::eval::parse_sweep_csv(&sweep).unwrap();
    assert_eq!(rows.iter().map(|r| r.mass).collect::<Vec<_>>(), vec![4.0, 5.0]);
    assert!(dir.join("eval/mass_sweep.gp").is_file());
}

#[test]
fn missing_final_checkpoint_names_the_expected_path() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert_eq!(code(&train_tiny(&dir, &[])), 0);
    fs::remove_file(dir.join("checkpoints/iter_000002.bin")).unwrap();
    let o = rarl(&["eval", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("iter_000002.bin"), "{}", stderr(&o));
}

fn oracle_json(path: &Path) -> serde_json::Value {
    let o = rarl(&["oracle", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn oracle_solves_a_repeated_biased_matching_pennies() {
    // Stage game [[2, -1], [-1, 1]]: row plays 0 with probability 2/5 and the stage
    // value is 1/5; repeated forever at discount 0.95 the value is 0.2 / 0.05 = 4.
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("pennies.game");
    fs::write(&p, "1 2 2\n0 0.95\n2 -1\n-1 1\n1\n1\n1\n1\n").unwrap();
    let v = oracle_json(&p);
    assert!((v["value"].as_f64().unwrap() - 4.0).abs() < 1e-9, "{v}");
    let row = v["row_strategies"][0].as_array().unwrap();
    assert!((row[0].as_f64().unwrap() - 0.4).abs() < 1e-9);
    let col = v["col_strategies"][0].as_array().unwrap();
    assert!((col[0].as_f64().unwrap() - 0.4).abs() < 1e-9);
    assert!(v["bellman_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn swapped_game_has_negated_value() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.game");
    let b = tmp.path().join("b.game");
    assert_eq!(code(&rarl(&["gen-game", "--seed", "3", "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&rarl(&["gen-game", "--seed", "3", "--swap", "--out", b.to_str().unwrap()])), 0);
    let va = oracle_json(&a)["value"].as_f64().unwrap();
    let vb = oracle_json(&b)["value"].as_f64().unwrap();
    assert!((va + vb).abs() < 1e-8, "{va} {vb}");

    fs::write(&a, "1 2 2\n0 0.95\n2 -1\n").unwrap();
    assert_eq!(code(&rarl(&["oracle", a.to_str().unwrap()])), 1);
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let o = rarl(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    for which in ["grad_log_prob", "surrogate_gradient", "fisher_vector_product"] {
        let o = rarl(&["gradcheck", "--perturb", which]);
        assert_eq!(code(&o), 2, "{which}");
        assert!(stderr(&o).contains("gradient check failed"));
    }
    assert_eq!(code(&rarl(&["gradcheck", "--perturb", "everything"])), 1);
}
