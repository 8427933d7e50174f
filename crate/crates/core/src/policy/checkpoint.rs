//! Portable binary checkpoints. All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   b"RARLCKPT"
//! version      u32       1
//! seed         u64
//! iteration    u64
//! n_policies   u32
//! per policy:
//!   kind       u32       1 = gaussian-mlp, 2 = softmax-tabular
//!   n_dims     u32
//!   dims       u64 * n_dims   gaussian: obs_dim, hidden1, hidden2, act_dim
//!                             softmax:  n_states, n_actions
//!   n_params   u64
//!   params     f64 * n_params
//! ```

use std::io::{Read, Write};

use super::{PolicyArch, PolicyParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RARLCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub arch: PolicyArch,
    pub params: PolicyParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub iteration: u64,
    pub policies: Vec<CheckpointEntry>,
}

pub fn write_checkpoint<W: Write>(out: &mut W, ckpt: &Checkpoint) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&ckpt.seed.to_le_bytes())?;
    out.write_all(&ckpt.iteration.to_le_bytes())?;
    out.write_all(&(ckpt.policies.len() as u32).to_le_bytes())?;
    for entry in &ckpt.policies {
        let (kind, dims): (u32, Vec<u64>) = match entry.arch {
            PolicyArch::GaussianMlp {
                obs_dim,
                hidden,
                act_dim,
            } => (1, vec![obs_dim as u64, hidden[0] as u64, hidden[1] as u64, act_dim as u64]),
            PolicyArch::SoftmaxTabular { n_states, n_actions } => (2, vec![n_states as u64, n_actions as u64]),
        };
        out.write_all(&kind.to_le_bytes())?;
        out.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            out.write_all(&d.to_le_bytes())?;
        }
        out.write_all(&(entry.params.len() as u64).to_le_bytes())?;
        for v in entry.params.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<Checkpoint> {
    let magic: [u8; 8] = read_array(input)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let seed = read_u64(input)?;
    let iteration = read_u64(input)?;
    let n = read_u32(input)?;
    let mut policies = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let kind = read_u32(input)?;
        let n_dims = read_u32(input)?;
        let dims = (0..n_dims)
            .map(|_| read_u64(input).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = match (kind, dims.as_slice()) {
            (1, &[obs_dim, h1, h2, act_dim]) => PolicyArch::GaussianMlp {
                obs_dim,
                hidden: [h1, h2],
                act_dim,
            },
            (2, &[n_states, n_actions]) => PolicyArch::SoftmaxTabular { n_states, n_actions },
            _ => return Err(Error::Checkpoint(format!("unknown policy kind {kind} with dims {dims:?}"))),
        };
        let n_params = read_u64(input)? as usize;
        let expected = arch.build().param_count();
        if n_params != expected {
            return Err(Error::Checkpoint(format!(
                "parameter count {n_params} does not match architecture ({expected})"
            )));
        }
        let params = (0..n_params)
            .map(|_| read_array::<8, _>(input).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        policies.push(CheckpointEntry {
            arch,
            params: PolicyParams(params),
        });
    }
    Ok(Checkpoint {
        seed,
        iteration,
        policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{GaussianMlpPolicy, StochasticPolicy};

    #[test]
    fn byte_layout_is_stable() {
        let p = GaussianMlpPolicy::new(1, [1, 1], 1);
        let params = PolicyParams(vec![1.5; p.param_count()]);
        let ckpt = Checkpoint {
            seed: 7,
            iteration: 3,
            policies: vec![CheckpointEntry {
                arch: p.arch(),
                params,
            }],
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        // 8 magic + 4 version + 8 seed + 8 iter + 4 count + 4 kind + 4 ndims + 32 dims + 8 nparams
        let header = 8 + 4 + 8 + 8 + 4 + 4 + 4 + 4 * 8 + 8;
        assert_eq!(buf.len(), header + 8 * p.param_count());
        assert_eq!(&buf[..8], b"RARLCKPT");
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(buf[header..header + 8].try_into().unwrap()), 1.5);
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), ckpt);
    }

    #[test]
    fn truncated_and_corrupt_files_rejected() {
        let ckpt = Checkpoint {
            seed: 0,
            iteration: 0,
            policies: vec![CheckpointEntry {
                arch: PolicyArch::SoftmaxTabular {
                    n_states: 2,
                    n_actions: 2,
                },
                params: PolicyParams(vec![0.0; 4]),
            }],
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        assert!(read_checkpoint(&mut &buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
