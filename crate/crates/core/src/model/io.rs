//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "BREPNET\0"
//! version    u32
//! header     u64 length + JSON (architecture, init, standardizer)
//! payload    u64 count + count × f64; each weight matrix column-major,
//!            biases as stored, blocks in parameter order
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ArchitectureConfig, BRepNetModel};
use crate::features::Standardizer;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"BREPNET\0";
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model file version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("corrupt model payload: {0}")]
    Corrupt(String),
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    architecture: ArchitectureConfig,
    init: InitRecord,
    standardizer: Option<Standardizer>,
    num_params: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct InitRecord {
    scheme: String,
    seed: u64,
}

fn weight_is_matrix<T: Scalar>(model: &BRepNetModel<T>) -> Vec<Option<(usize, usize)>> {
    let mut shapes = Vec::new();
    for unit in &model.units {
        for layer in &unit.layers {
            shapes.push(Some(layer.weight.shape()));
            if layer.bias.is_some() {
                shapes.push(None);
            }
        }
    }
    shapes
}

/// Serializes a model to bytes.
pub fn write_model<T: Scalar>(model: &BRepNetModel<T>) -> Vec<u8> {
    let header = Header {
        dtype: T::DTYPE.to_string(),
        architecture: model.config.clone(),
        init: InitRecord { scheme: "glorot_uniform".into(), seed: model.init_seed },
        standardizer: model.standardizer.clone(),
        num_params: model.num_params(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(64 + header.len() + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for (block, shape) in model.param_blocks().into_iter().zip(weight_is_matrix(model)) {
        match shape {
            Some((rows, cols)) => {
                for j in 0..cols {
                    for i in 0..rows {
                        out.extend_from_slice(&block[i * cols + j].to_f64_lossy().to_le_bytes());
                    }
                }
            }
            None => {
                for v in block {
                    out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
                }
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelIoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelIoError::Corrupt(format!("truncated while reading {what}")))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parses a model from bytes. Nothing is returned unless the version,
/// lengths, checksum and header all check out.
pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<BRepNetModel<T>, ModelIoError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(ModelIoError::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch { found: version });
    }
    let header_len = cur.u64("header length")? as usize;
    let header_bytes = cur.take(header_len, "header")?;
    let count = cur.u64("parameter count")? as usize;
    let payload = cur.take(count.checked_mul(8).ok_or_else(|| ModelIoError::Corrupt("parameter count overflow".into()))?, "parameters")?;
    let body_end = cur.pos;
    let checksum = cur.take(CHECKSUM_LEN, "checksum")?;
    if cur.pos != bytes.len() {
        return Err(ModelIoError::Corrupt(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != checksum {
        return Err(ModelIoError::ChecksumMismatch);
    }

    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| ModelIoError::Corrupt(format!("header: {e}")))?;
    let mut model = BRepNetModel::<T>::zeros(header.architecture)
        .map_err(|e| ModelIoError::Corrupt(format!("architecture: {e}")))?;
    if model.num_params() != count || header.num_params != count {
        return Err(ModelIoError::Corrupt(format!(
            "payload has {count} values, architecture needs {}",
            model.num_params()
        )));
    }
    model.init_seed = header.init.seed;
    model.standardizer = header.standardizer;

    let shapes = weight_is_matrix(&model);
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for (block, shape) in model.param_blocks_mut().into_iter().zip(shapes) {
        match shape {
            Some((rows, cols)) => {
                for j in 0..cols {
                    for i in 0..rows {
                        block[i * cols + j] = T::of_f64(values.next().expect("count checked"));
                    }
                }
            }
            None => {
                for v in block.iter_mut() {
                    *v = T::of_f64(values.next().expect("count checked"));
                }
            }
        }
    }
    Ok(model)
}

pub fn save_model<T: Scalar>(model: &BRepNetModel<T>, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<BRepNetModel<T>, ModelIoError> {
    read_model(&fs::read(path)?)
}
