//! Checkpoint files.
//!
//! Layout: 8-byte magic `NSMC0001`, little-endian u32 JSON header length,
//! the JSON header (architecture, σ², Euler-order tag, sequence-name table,
//! seed lineage, layout counts), an f32 blob of layer parameters (per layer:
//! weights row-major, then biases), an f64 blob of latent codes, an f64 blob
//! of angles (rotation-aware models only), and an optional f64 optimizer
//! blob (first moments, second moments, u64 step) for resumable training.
//! Save → load → save reproduces the file byte for byte.

use super::{ArchitectureSpec, Layer, ModelState};
use crate::mat::Mat;
use crate::rot::EULER_ORDER_TAG;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NSMC0001";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: ArchitectureSpec,
    sigma2: f64,
    euler_order: String,
    seq_names: Vec<String>,
    n_sequences: usize,
    seed: u64,
    has_optimizer: bool,
    opt_step: u64,
}

/// Optimizer payload: flattened first/second moments over every trainable
/// scalar (layer params, latents, angles, in checkpoint order) plus the
/// step counter.
pub struct OptimizerBlob {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

pub fn save_checkpoint(
    path: &Path,
    state: &ModelState,
    optimizer: Option<&OptimizerBlob>,
) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let header = Header {
        version: FORMAT_VERSION,
        arch: state.arch.clone(),
        sigma2: state.sigma2,
        euler_order: EULER_ORDER_TAG.to_string(),
        seq_names: state.seq_names.clone(),
        n_sequences: state.latents.len(),
        seed: state.seed,
        has_optimizer: optimizer.is_some(),
        opt_step: optimizer.map_or(0, |o| o.step),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| CheckpointError::Format(format!("header serialization: {e}")))?;

    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for layer in &state.layers {
        for &v in layer.w.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &v in &layer.b {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for z in &state.latents {
        for &v in z {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if state.arch.equivariant {
        for a in &state.angles {
            for &v in a {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(opt) = optimizer {
        for &v in opt.m.iter().chain(&opt.v) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&opt.step.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&buf).map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, Option<OptimizerBlob>), CheckpointError> {
    let raw = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fail = |d: &str| CheckpointError::Format(format!("{}: {d}", path.display()));
    if raw.len() < 12 || &raw[..8] != CHECKPOINT_MAGIC {
        return Err(fail("bad magic"));
    }
    let hlen = u32::from_le_bytes(raw[8..12].try_into().unwrap()) as usize;
    if raw.len() < 12 + hlen {
        return Err(fail("truncated header"));
    }
    let header: Header = serde_json::from_slice(&raw[12..12 + hlen])
        .map_err(|e| fail(&format!("header parse: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(fail(&format!("unsupported version {}", header.version)));
    }
    if header.euler_order != EULER_ORDER_TAG {
        return Err(fail(&format!(
            "euler order {} not supported (expected {EULER_ORDER_TAG})",
            header.euler_order
        )));
    }
    let mut off = 12 + hlen;
    let take_f32 = |raw: &[u8], off: &mut usize, n: usize| -> Result<Vec<f64>, CheckpointError> {
        if raw.len() < *off + n * 4 {
            return Err(CheckpointError::Format("truncated parameter blob".into()));
        }
        let out = raw[*off..*off + n * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        *off += n * 4;
        Ok(out)
    };
    let take_f64 = |raw: &[u8], off: &mut usize, n: usize| -> Result<Vec<f64>, CheckpointError> {
        if raw.len() < *off + n * 8 {
            return Err(CheckpointError::Format("truncated f64 blob".into()));
        }
        let out = raw[*off..*off + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *off += n * 8;
        Ok(out)
    };

    let mut layers = Vec::new();
    for (c_in, c_out) in header.arch.layer_dims() {
        let w = take_f32(&raw, &mut off, c_in * c_out)?;
        let b = take_f32(&raw, &mut off, c_out)?;
        layers.push(Layer {
            w: Mat::from_vec(c_out, c_in, w),
            b,
        });
    }
    let mut latents = Vec::new();
    for _ in 0..header.n_sequences {
        latents.push(take_f64(&raw, &mut off, header.arch.latent_dim)?);
    }
    let mut angles = Vec::new();
    if header.arch.equivariant {
        for _ in 0..header.n_sequences {
            let a = take_f64(&raw, &mut off, 3)?;
            angles.push([a[0], a[1], a[2]]);
        }
    }
    let optimizer = if header.has_optimizer {
        let per = (raw.len() - off - 8) / 8;
        if per % 2 != 0 {
            return Err(fail("optimizer blob has odd length"));
        }
        let n = per / 2;
        let m = take_f64(&raw, &mut off, n)?;
        let v = take_f64(&raw, &mut off, n)?;
        if raw.len() != off + 8 {
            return Err(fail("trailing bytes after optimizer blob"));
        }
        let step = u64::from_le_bytes(raw[off..off + 8].try_into().unwrap());
        off += 8;
        Some(OptimizerBlob { m, v, step })
    } else {
        None
    };
    if raw.len() != off {
        return Err(fail("trailing bytes"));
    }
    if header.seq_names.len() != header.n_sequences {
        return Err(fail("sequence name table length mismatch"));
    }
    Ok((
        ModelState {
            arch: header.arch,
            layers,
            latents,
            angles,
            seq_names: header.seq_names,
            sigma2: header.sigma2,
            seed: header.seed,
        },
        optimizer,
    ))
}
