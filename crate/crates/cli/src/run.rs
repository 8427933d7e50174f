//! Run directory layout:
//!
//! ```text
//! <run>/manifest.json
//! <run>/config.resolved
//! <run>/stats.csv          per-update statistics
//! <run>/timing.csv         per-update wall time
//! <run>/checkpoints/iter_%06d.bin
//! <run>/eval/*.csv
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rarl_core::policy::{read_checkpoint, Checkpoint};
use rarl_core::trainer::UpdateStats;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.resolved";
pub const STATS: &str = "stats.csv";
pub const TIMING: &str = "timing.csv";
pub const CHECKPOINTS: &str = "checkpoints";
pub const EVAL: &str = "eval";

pub const STATS_HEADER: &str = "iteration,player,inner,mean_return1,mean_return2,mean_length,\
surrogate_before,surrogate_after,kl,cg_residual,backtracks,grad_norm,accepted";
pub const TIMING_HEADER: &str = "iteration,player,inner,seconds";

/// Version string identifying the code that produced a run.
pub fn code_version() -> String {
    format!("rarl {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of `text` framed like a git blob (`blob <len>\0<text>`), with SHA-256.
pub fn blob_hash(text: &str) -> String {
    let mut framed = format!("blob {}\0", text.len()).into_bytes();
    framed.extend_from_slice(text.as_bytes());
    sha256_hex(&framed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub env: String,
    pub mode: String,
    pub seed: u64,
    pub n_iter: usize,
    pub code_version: String,
    pub code_hash: String,
    pub config: String,
    pub config_sha256: String,
    pub stats: String,
    pub timing: String,
    pub checkpoints: Vec<String>,
    pub final_checkpoint: String,
}

pub fn checkpoint_name(iteration: usize) -> String {
    format!("{CHECKPOINTS}/iter_{iteration:06}.bin")
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Create a fresh run directory. An existing non-empty directory is replaced only
    /// with `force`.
    pub fn create(root: &Path, force: bool) -> Result<RunDir> {
        if root.exists() {
            let non_empty = fs::read_dir(root)
                .with_context(|| format!("reading {}", root.display()))?
                .next()
                .is_some();
            if non_empty {
                if !force {
                    bail!(crate::UsageError(format!(
                        "run directory {} already exists (use --force to overwrite)",
                        root.display()
                    )));
                }
                fs::remove_dir_all(root).with_context(|| format!("removing {}", root.display()))?;
            }
        }
        fs::create_dir_all(root.join(CHECKPOINTS)).with_context(|| format!("creating {}", root.display()))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<RunDir> {
        if !root.join(CONFIG).is_file() {
            bail!(crate::UsageError(format!(
                "{} is not a run directory (missing {})",
                root.display(),
                root.join(CONFIG).display()
            )));
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn eval_dir(&self) -> Result<PathBuf> {
        let d = self.root.join(EVAL);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    pub fn write(&self, rel: &str, contents: &[u8]) -> Result<()> {
        let p = self.root.join(rel);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        let p = self.path(MANIFEST);
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    /// The checkpoint written after the last iteration.
    pub fn final_checkpoint(&self, n_iter: usize) -> Result<Checkpoint> {
        let p = self.path(&checkpoint_name(n_iter));
        let f = fs::File::open(&p).with_context(|| format!("missing final checkpoint, expected {}", p.display()))?;
        read_checkpoint(&mut std::io::BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
    }
}

pub fn stats_row(s: &UpdateStats) -> String {
    let d = &s.diagnostics;
    format!(
        "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{:?},{}",
        s.iteration,
        match s.player {
            rarl_core::Player::Protagonist => "protagonist",
            rarl_core::Player::Adversary => "adversary",
        },
        s.inner,
        s.mean_return1,
        s.mean_return2,
        s.mean_length,
        d.surrogate_before,
        d.surrogate_after,
        d.kl,
        d.cg_residual,
        d.backtracks,
        d.grad_norm,
        d.accepted()
    )
}

/// Append-only CSV that flushes every row.
pub struct CsvLog {
    file: std::io::BufWriter<fs::File>,
}

impl CsvLog {
    pub fn create(path: &Path, header: &str) -> Result<CsvLog> {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut log = CsvLog {
            file: std::io::BufWriter::new(f),
        };
        log.row(header)?;
        Ok(log)
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_frames_content() {
        assert_eq!(blob_hash(""), sha256_hex(b"blob 0\0"));
        assert_ne!(blob_hash("a"), blob_hash("b"));
        assert_eq!(checkpoint_name(7), "checkpoints/iter_000007.bin");
    }

    #[test]
    fn existing_directory_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("run");
        let r = RunDir::create(&root, false).unwrap();
        r.write("x", b"1").unwrap();
        assert!(RunDir::create(&root, false).is_err());
        RunDir::create(&root, true).unwrap();
        assert!(!root.join("x").exists());
    }
}
