//! Checkpoint layout: `b"DMEMCKPT"`, `u32` version, `u32` byte length of the
//! network spec text, the spec text, then every parameter tensor as
//! little-endian `f64` in declaration order.

use std::fs;
use std::path::Path;

use super::{ModelParams, NetworkSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DMEMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn checkpoint_bytes(spec: &NetworkSpec, params: &ModelParams) -> Vec<u8> {
    let text = spec.to_text();
    let mut out = Vec::with_capacity(16 + text.len() + 8 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for t in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(NetworkSpec, ModelParams)> {
    let bad = |msg: &str| Error::format("checkpoint", msg);
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad("unsupported version"));
    }
    let text_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let text = bytes
        .get(16..16 + text_len)
        .ok_or_else(|| bad("truncated spec block"))?;
    let text = std::str::from_utf8(text).map_err(|_| bad("spec block is not UTF-8"))?;
    let spec = NetworkSpec::from_text(text)?;
    let mut params = ModelParams::zeros(&spec);
    let payload = &bytes[16 + text_len..];
    let expected = 8 * params.parameter_count();
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    Ok((spec, params))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    spec: &NetworkSpec,
    params: &ModelParams,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(spec, params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(NetworkSpec, ModelParams)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
