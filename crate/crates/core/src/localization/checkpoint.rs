//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//! `magic (8) | version u32 | config_len u32 | config JSON | n_tensors u32 |
//! per tensor: rank u32, dims u32 × rank, data f32 × product(dims)`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use vid2trace_nn::Tensor;

use super::{LocModel, LocModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"V2TCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: not a vid2trace checkpoint")]
    Magic { path: String },
    #[error("{path}: unsupported checkpoint version {version}")]
    Version { path: String, version: u32 },
    #[error("{path}: {message}")]
    Corrupt { path: String, message: String },
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint(model: &LocModel<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    let cfg = serde_json::to_vec(model.config()).expect("config serializes");
    put_u32(&mut out, cfg.len() as u32);
    out.extend_from_slice(&cfg);
    put_u32(&mut out, model.params().len() as u32);
    for t in model.params() {
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            put_u32(&mut out, d as u32);
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, model: &LocModel<f32>) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode_checkpoint(model)).map_err(io_err)?;
    f.sync_all().map_err(io_err)
}

struct Reader<'a> {
    bytes: &'a [u8],
    path: &'a str,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Corrupt { path: self.path.into(), message: "truncated".into() });
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &str) -> Result<LocModel<f32>, CheckpointError> {
    let corrupt = |message: String| CheckpointError::Corrupt { path: path.into(), message };
    let mut r = Reader { bytes, path };
    if r.take(8).map_err(|_| CheckpointError::Magic { path: path.into() })? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Magic { path: path.into() });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { path: path.into(), version });
    }
    let n = r.u32()? as usize;
    let config: LocModelConfig = serde_json::from_slice(r.take(n)?).map_err(|e| corrupt(format!("config block: {e}")))?;
    let count = r.u32()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(corrupt(format!("tensor rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        params.push(Tensor::from_vec(&shape, data).map_err(|e| corrupt(e.to_string()))?);
    }
    if !r.bytes.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", r.bytes.len())));
    }
    LocModel::from_params(config, params).map_err(|e| corrupt(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<LocModel<f32>, CheckpointError> {
    let p = path.display().to_string();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
    decode_checkpoint(&bytes, &p)
}
