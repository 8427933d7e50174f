use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use rarl_core::policy::{write_checkpoint, Checkpoint};
use rarl_core::trainer::{train_with, TrainObserver, UpdateStats};
use rarl_core::Player;

use super::{load_config, run_root};
use crate::config::ExperimentConfig;
use crate::run::{
    blob_hash, checkpoint_name, code_version, sha256_hex, stats_row, CsvLog, Manifest, RunDir, CONFIG, MANIFEST,
    STATS, STATS_HEADER, TIMING, TIMING_HEADER,
};
use crate::{TrainArgs, UsageError};

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut overrides = args.overrides.clone();
    if args.baseline {
        overrides.push("train.baseline_mode=true".into());
    }
    if let Some(s) = args.seed {
        overrides.push(format!("train.seed={s}"));
    }
    let config = load_config(args.config.as_deref(), &overrides)?;
    let n = args.seeds.unwrap_or(1);
    if n == 0 {
        bail!(UsageError("--seeds must be at least 1".into()));
    }
    for k in 0..n as u64 {
        let mut c = config.clone();
        c.seed = config.seed + k;
        let dir = match &args.out {
            Some(o) if n == 1 => o.clone(),
            Some(o) => o.join(format!("seed{}", c.seed)),
            None => run_root().join(run_name(&c)),
        };
        train_one(&c, &dir, args.force)?;
        println!("{}", dir.display());
    }
    Ok(())
}

pub fn run_name(c: &ExperimentConfig) -> String {
    format!("{}-{}-seed{}", c.env.name(), mode(c), c.seed)
}

fn mode(c: &ExperimentConfig) -> &'static str {
    if c.baseline_mode {
        "baseline"
    } else {
        "rarl"
    }
}

struct RunObserver {
    dir: RunDir,
    stats: CsvLog,
    timing: CsvLog,
    clock: Instant,
    checkpoints: Vec<String>,
    log_error: Option<anyhow::Error>,
}

impl TrainObserver for RunObserver {
    fn on_update(&mut self, s: &UpdateStats) {
        let secs = self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
        let player = match s.player {
            Player::Protagonist => "protagonist",
            Player::Adversary => "adversary",
        };
        let r = self
            .stats
            .row(&stats_row(s))
            .and_then(|_| self.timing.row(&format!("{},{player},{},{secs:.6}", s.iteration, s.inner)));
        if let Err(e) = r {
            self.log_error.get_or_insert(e);
        }
    }

    fn on_checkpoint(&mut self, ckpt: &Checkpoint) -> rarl_core::Result<()> {
        let name = checkpoint_name(ckpt.iteration as usize);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, ckpt)?;
        std::fs::write(self.dir.path(&name), buf)?;
        self.checkpoints.push(name);
        Ok(())
    }
}

pub fn train_one(c: &ExperimentConfig, dir: &Path, force: bool) -> Result<PathBuf> {
    let tc = c.train_config().context("building training configuration")?;
    let rd = RunDir::create(dir, force)?;
    let config_text = c.to_text();
    rd.write(CONFIG, config_text.as_bytes())?;
    let mut obs = RunObserver {
        stats: CsvLog::create(&rd.path(STATS), STATS_HEADER)?,
        timing: CsvLog::create(&rd.path(TIMING), TIMING_HEADER)?,
        dir: rd.clone(),
        clock: Instant::now(),
        checkpoints: Vec::new(),
        log_error: None,
    };
    train_with(&tc, &mut obs, None).with_context(|| format!("training into {}", dir.display()))?;
    if let Some(e) = obs.log_error {
        return Err(e.context("writing training logs"));
    }
    let manifest = Manifest {
        env: c.env.name().into(),
        mode: mode(c).into(),
        seed: c.seed,
        n_iter: c.n_iter,
        code_version: code_version(),
        code_hash: blob_hash(&code_version()),
        config: CONFIG.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        stats: STATS.into(),
        timing: TIMING.into(),
        final_checkpoint: checkpoint_name(c.n_iter),
        checkpoints: obs.checkpoints,
    };
    rd.write(MANIFEST, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(dir.to_path_buf())
}
