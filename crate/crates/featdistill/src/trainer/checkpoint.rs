//! Versioned binary checkpoints. Layout (integers and reals little-endian):
//! magic `FDCK`, version u16, head dim u32, projector flag u8, step u64,
//! 32-byte config hash, head weights (dim f64), bias (f64), and, when the
//! flag is set, the dim×dim projector. Write∘read is the identity.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::ClassifierHead;
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 4] = b"FDCK";
const VERSION: u16 = 1;

/// Trained parameters at a stage boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub head: ClassifierHead,
    /// Row-major D×D student feature projector; absent after Stage 1.
    pub projector: Option<Vec<f64>>,
    /// SGD updates applied so far.
    pub step: u64,
    /// SHA-256 of the canonical training-config serialization.
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn dim(&self) -> usize {
        self.head.weights.len()
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let finite = self.head.weights.iter().all(|v| v.is_finite()) && self.head.bias.is_finite();
        if !finite {
            return Err(Error::invalid("checkpoint head contains non-finite values"));
        }
        if let Some(p) = &self.projector {
            if p.len() != dim * dim {
                return Err(Error::shape(format!(
                    "projector has {} entries, expected {dim}x{dim}",
                    p.len()
                )));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("checkpoint projector contains non-finite values"));
            }
        }
        Ok(())
    }
}

/// SHA-256 over the canonical JSON form of the config.
pub fn config_hash(config: &TrainConfig) -> [u8; 32] {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.into()
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.validate()?;
    let dim = ckpt.dim();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.push(ckpt.projector.is_some() as u8);
    out.extend_from_slice(&ckpt.step.to_le_bytes());
    out.extend_from_slice(&ckpt.config_hash);
    for w in &ckpt.head.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&ckpt.head.bias.to_le_bytes());
    if let Some(p) = &ckpt.projector {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &buf[pos..pos + n];
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint file", path.display())));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let has_projector = match take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("bad projector flag {other}"))),
    };
    let step = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let config_hash: [u8; 32] = take(32)?.try_into().unwrap();
    let mut f64s = |n: usize| -> Result<Vec<f64>> {
        Ok(take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let weights = f64s(dim)?;
    let bias = f64s(1)?[0];
    let projector = if has_projector { Some(f64s(dim * dim)?) } else { None };
    if pos != buf.len() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    let ckpt = Checkpoint { head: ClassifierHead { weights, bias }, projector, step, config_hash };
    ckpt.validate()?;
    Ok(ckpt)
}
