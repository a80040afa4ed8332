use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RunConfig;
use crate::model::{EncoderConfig, HeadConfig, Model, ModelParams};
use crate::optim::OptimState;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const CKPT_MAGIC: &[u8; 4] = b"DORA";
pub const CKPT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint format: {0}")]
    Format(String),
    #[error("corrupt tensor data: {0}")]
    CorruptTensor(String),
}

/// Model, optimizer state and progress of a run.
///
/// All randomness is derived from `(seed, epoch, index)`, so the seed is the
/// complete RNG state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T = f64> {
    pub config: RunConfig,
    pub model: Model<T>,
    pub optim: OptimState<T>,
    pub epoch: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: RunConfig,
    encoder: EncoderConfig,
    head: HeadConfig,
    epoch: usize,
    seed: u64,
    optim_step: u64,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the payload.
    offset: usize,
}

impl<T: Real> Checkpoint<T> {
    /// `DORA`, version u32, header length u64, JSON header, then every tensor
    /// as little-endian f64 in header order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut named: Vec<(String, &Tensor<T>)> = self
            .model
            .params
            .iter()
            .map(|(n, t)| (format!("param/{n}"), t))
            .collect();
        named.extend(self.optim.named_slots().into_iter().map(|(n, t)| (format!("optim/{n}"), t)));
        let mut offset = 0;
        let tensors = named
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += t.len();
                e
            })
            .collect();
        let header = Header {
            config: self.config.clone(),
            encoder: self.model.encoder.clone(),
            head: self.model.head,
            epoch: self.epoch,
            seed: self.seed,
            optim_step: self.optim.step,
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * offset);
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &named {
            for v in t.data() {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let truncated = || CheckpointError::CorruptTensor(format!("file truncated at {} bytes", bytes.len()));
        if bytes.len() < 16 {
            if bytes.len() >= 4 && &bytes[..4] != CKPT_MAGIC {
                return Err(CheckpointError::Format("bad magic, expected DORA".into()));
            }
            return Err(truncated());
        }
        if &bytes[..4] != CKPT_MAGIC {
            return Err(CheckpointError::Format("bad magic, expected DORA".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CKPT_VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let hend = usize::try_from(hlen)
            .ok()
            .and_then(|h| h.checked_add(16))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(truncated)?;
        let header: Header = serde_json::from_slice(&bytes[16..hend])
            .map_err(|e| CheckpointError::Format(format!("header: {e}")))?;
        let payload = &bytes[hend..];
        let total: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if payload.len() != 8 * total {
            return Err(CheckpointError::CorruptTensor(format!(
                "payload has {} bytes, header describes {}",
                payload.len(),
                8 * total
            )));
        }
        let mut params = ModelParams::default();
        let mut optim = OptimState::new();
        optim.step = header.optim_step;
        let mut expected_offset = 0;
        for entry in &header.tensors {
            if entry.offset != expected_offset {
                return Err(CheckpointError::Format(format!("tensor `{}` at unexpected offset", entry.name)));
            }
            let n: usize = entry.shape.iter().product();
            expected_offset += n;
            let data: Vec<T> = payload[8 * entry.offset..8 * (entry.offset + n)]
                .chunks_exact(8)
                .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
                .collect();
            let t = Tensor::new(entry.shape.clone(), data)
                .map_err(|e| CheckpointError::CorruptTensor(format!("`{}`: {e}", entry.name)))?;
            if let Some(name) = entry.name.strip_prefix("param/") {
                params.insert(name, t);
            } else if let Some(slot) = entry.name.strip_prefix("optim/") {
                if !optim.insert_slot(slot, t) {
                    return Err(CheckpointError::Format(format!("unknown optimizer slot `{slot}`")));
                }
            } else {
                return Err(CheckpointError::Format(format!("unknown tensor `{}`", entry.name)));
            }
        }
        let model = Model {
            encoder: header.encoder,
            head: header.head,
            params,
        };
        model
            .check_params()
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        Ok(Self {
            config: header.config,
            model,
            optim,
            epoch: header.epoch,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes()).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_bytes(&bytes)
    }
}
