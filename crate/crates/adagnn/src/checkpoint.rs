//! Binary model checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! magic        8 bytes  "ADAGNNCK"
//! version      u32      FORMAT_VERSION
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON (see `Header`)
//! tensors      header.num_tensors records:
//!                name_len u32, name UTF-8, ndim u32, dims u64 × ndim,
//!                values f64 × prod(dims), row major
//! digest       32 bytes SHA-256 of everything above
//! ```
//!
//! Tensor names are `value/<param>`, `adam.m/<param>`, `adam.v/<param>` and,
//! when a validation set was used, `best/<param>`.

use std::path::Path;

use adagnn_core::tensor::Matrix;
use adagnn_core::{BestSnapshot, ModelConfig, ModelState, OptimConfig, Trainer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ADAGNNCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub model_config: ModelConfig,
    pub optim_config: OptimConfig,
    pub epochs_completed: usize,
    pub adam_step: u64,
    pub best_valid_mae: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Hash of the fields that fix the parameter layout and the input pipeline.
    pub config_hash: String,
    pub num_tensors: usize,
}

/// Everything needed to predict with or resume a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: ModelState,
    pub optim: OptimConfig,
    pub epochs_completed: usize,
    pub best: Option<BestSnapshot>,
}

#[derive(Serialize)]
struct Architecture<'a> {
    hidden_dim: usize,
    num_blocks: usize,
    basis: &'a adagnn_core::BasisConfig,
    cutoffs: &'a adagnn_core::CutoffConfig,
    use_angles: bool,
}

/// Hex SHA-256 of the architecture fields of `config` (the seed is excluded).
pub fn config_hash(config: &ModelConfig) -> String {
    let arch = Architecture {
        hidden_dim: config.hidden_dim,
        num_blocks: config.num_blocks,
        basis: &config.basis,
        cutoffs: &config.cutoffs,
        use_angles: config.use_angles,
    };
    let json = serde_json::to_vec(&arch).expect("plain data serializes");
    hex(&Sha256::digest(&json))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer, optim: OptimConfig) -> Self {
        Self {
            state: trainer.state().clone(),
            optim,
            epochs_completed: trainer.epochs_completed(),
            best: trainer.best().cloned(),
        }
    }

    /// State used for prediction: best validation parameters when present.
    pub fn predictor(&self) -> ModelState {
        let mut state = self.state.clone();
        if let Some(b) = &self.best {
            state.load_values_from(&b.params).expect("checked on load");
        }
        state
    }

    pub fn into_trainer(self, optim: OptimConfig) -> Result<Trainer> {
        Ok(Trainer::resume(self.state, optim, self.epochs_completed, self.best)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let store = self.state.store();
        let mut tensors: Vec<(String, &Matrix)> = Vec::new();
        for p in store.iter() {
            tensors.push((format!("value/{}", p.name), &p.value));
            tensors.push((format!("adam.m/{}", p.name), &p.first_moment));
            tensors.push((format!("adam.v/{}", p.name), &p.second_moment));
        }
        if let Some(b) = &self.best {
            for p in b.params.iter() {
                tensors.push((format!("best/{}", p.name), &p.value));
            }
        }
        let header = Header {
            model_config: *self.state.config(),
            optim_config: self.optim,
            epochs_completed: self.epochs_completed,
            adam_step: store.step,
            best_valid_mae: self.best.as_ref().map(|b| b.valid_mae),
            best_epoch: self.best.as_ref().map(|b| b.epoch),
            config_hash: config_hash(self.state.config()),
            num_tensors: tensors.len(),
        };
        let header = serde_json::to_vec(&header).expect("plain data serializes");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (name, m) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&2u32.to_le_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 4 + 8 + 32 || &bytes[..8] != MAGIC {
            return Err(bad("not an adagnn checkpoint"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch (file truncated or corrupted)"));
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let header_len = r.u64()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        if header.config_hash != config_hash(&header.model_config) {
            return Err(bad("config hash does not match the stored model config"));
        }

        let mut tensors = std::collections::HashMap::new();
        for _ in 0..header.num_tensors {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
            let ndim = r.u32()? as usize;
            let dims = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let (rows, cols) = match dims[..] {
                [rows, cols] => (rows, cols),
                _ => return Err(Error::Checkpoint(format!("tensor {name}: expected 2 dims, found {ndim}"))),
            };
            let count = rows.checked_mul(cols).ok_or_else(|| bad("tensor size overflow"))?;
            let raw = r.take(count.checked_mul(8).ok_or_else(|| bad("tensor size overflow"))?)?;
            let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let m = Matrix::from_vec(rows, cols, values).map_err(|e| Error::Checkpoint(e.to_string()))?;
            if tensors.insert(name.clone(), m).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
            }
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes after tensors"));
        }

        let mut state = ModelState::new(header.model_config)?;
        let mut take = |name: String, like: &Matrix| -> Result<Matrix> {
            let m = tensors.remove(&name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if m.shape() != like.shape() {
                return Err(Error::Incompatible(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    m.shape(),
                    like.shape()
                )));
            }
            Ok(m)
        };
        let mut best_params = header.best_valid_mae.map(|_| state.store().clone());
        for p in state.store_mut().iter_mut() {
            p.value = take(format!("value/{}", p.name), &p.value)?;
            p.first_moment = take(format!("adam.m/{}", p.name), &p.value)?;
            p.second_moment = take(format!("adam.v/{}", p.name), &p.value)?;
        }
        if let Some(store) = best_params.as_mut() {
            for p in store.iter_mut() {
                p.value = take(format!("best/{}", p.name), &p.value)?;
            }
        }
        if let Some(name) = tensors.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {name}")));
        }
        state.store_mut().step = header.adam_step;
        let best = match (header.best_valid_mae, header.best_epoch, best_params) {
            (Some(valid_mae), Some(epoch), Some(params)) => Some(BestSnapshot { valid_mae, epoch, params }),
            (None, None, None) => None,
            _ => return Err(bad("best snapshot fields are inconsistent")),
        };
        Ok(Self { state, optim: header.optim_config, epochs_completed: header.epochs_completed, best })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Refuse to use this checkpoint where `expected` architecture is required.
    pub fn ensure_compatible(&self, expected: &ModelConfig) -> Result<()> {
        let have = self.state.config();
        if have.hidden_dim != expected.hidden_dim {
            return Err(Error::Incompatible(format!(
                "checkpoint has hidden_dim {}, requested {}",
                have.hidden_dim, expected.hidden_dim
            )));
        }
        if config_hash(have) != config_hash(expected) {
            return Err(Error::Incompatible(format!(
                "architecture differs (checkpoint config hash {}, requested {})",
                config_hash(have),
                config_hash(expected)
            )));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
