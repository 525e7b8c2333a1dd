//! `SGM1` model container.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `SGM1` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8 + 8 | embedding width `d`, hidden width `h` (`u64`) |
//! | 1     | activation (0 = ReLU) |
//! | 1     | optimizer (0 = Adam, 1 = SGD) |
//! | 6     | zero padding |
//! | 5 × 8 | learning rate, L2 penalty, β1, β2, ε (`f64`; zeros for SGD) |
//! | 8 + 8 | epochs, seed (`u64`) |
//! | 32    | SHA-256 of the vocabulary the model was trained against |
//! | …     | `w1` (d·h), `w2` (h·h), `w_out` (h·2), `b_out` (2) as `f64`, row-major |

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Activation, GcnParams, OptimizerKind, TrainConfig};
use crate::error::ModelError;
use crate::graph::Vocabulary;
use crate::linalg::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"SGM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub config: TrainConfig,
    pub params: GcnParams,
    /// Hex SHA-256 of the training vocabulary.
    pub vocab_fingerprint: String,
}

impl GcnModel {
    pub fn new(config: TrainConfig, params: GcnParams, vocab_fingerprint: String) -> Self {
        GcnModel {
            config,
            params,
            vocab_fingerprint,
        }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(128 + 8 * p.parameter_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(p.dim() as u64).to_le_bytes());
        out.extend_from_slice(&(p.hidden() as u64).to_le_bytes());
        out.push(match p.activation {
            Activation::Relu => 0,
        });
        let (opt_tag, beta1, beta2, eps) = match self.config.optimizer {
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => (0u8, beta1, beta2, epsilon),
            OptimizerKind::Sgd => (1u8, 0.0, 0.0, 0.0),
        };
        out.push(opt_tag);
        out.extend_from_slice(&[0u8; 6]);
        for x in [
            self.config.learning_rate,
            self.config.l2_penalty,
            beta1,
            beta2,
            eps,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(self.config.epochs as u64).to_le_bytes());
        out.extend_from_slice(&self.config.seed.to_le_bytes());
        let mut fp = [0u8; 32];
        if let Ok(bytes) = hex::decode(&self.vocab_fingerprint) {
            if bytes.len() == 32 {
                fp.copy_from_slice(&bytes);
            }
        }
        out.extend_from_slice(&fp);
        for s in p.slices() {
            for x in s {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = bytes;
        let bad = |m: String| ModelError::BadContainer(m);
        let mut magic = [0u8; 4];
        read(&mut r, &mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let dim = u64::from_le_bytes(take(&mut r)?) as usize;
        let hidden = u64::from_le_bytes(take(&mut r)?) as usize;
        let [act, opt, _, _, _, _, _, _] = take::<8>(&mut r)?;
        if act != 0 {
            return Err(bad(format!("unknown activation tag {act}")));
        }
        let mut f = [0.0; 5];
        for x in &mut f {
            *x = f64::from_le_bytes(take(&mut r)?);
        }
        let [learning_rate, l2_penalty, beta1, beta2, epsilon] = f;
        let optimizer = match opt {
            0 => OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            },
            1 => OptimizerKind::Sgd,
            t => return Err(bad(format!("unknown optimizer tag {t}"))),
        };
        let epochs = u64::from_le_bytes(take(&mut r)?) as usize;
        let seed = u64::from_le_bytes(take(&mut r)?);
        let fp: [u8; 32] = take(&mut r)?;
        let vocab_fingerprint = if fp == [0u8; 32] {
            String::new()
        } else {
            hex::encode(fp)
        };

        let expected = dim
            .checked_mul(hidden)
            .and_then(|a| a.checked_add(hidden.checked_mul(hidden)?))
            .and_then(|a| a.checked_add(hidden.checked_mul(2)?))
            .and_then(|a| a.checked_add(2))
            .and_then(|a| a.checked_mul(8))
            .ok_or_else(|| bad("weight dimensions overflow".into()))?;
        if r.len() != expected {
            return Err(bad(format!(
                "expected {expected} weight bytes for d={dim}, h={hidden}, found {}",
                r.len()
            )));
        }
        let mut floats = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut matrix = |rows: usize, cols: usize| {
            let data: Vec<f64> = floats.by_ref().take(rows * cols).collect();
            Matrix::from_vec(rows, cols, data).map_err(ModelError::from)
        };
        let w1 = matrix(dim, hidden)?;
        let w2 = matrix(hidden, hidden)?;
        let w_out = matrix(hidden, 2)?;
        let b = matrix(1, 2)?;
        let params = GcnParams {
            w1,
            w2,
            w_out,
            b_out: [b[(0, 0)], b[(0, 1)]],
            activation: Activation::Relu,
        };
        if !params.is_finite() {
            return Err(bad("weights contain non-finite values".into()));
        }
        Ok(GcnModel {
            config: TrainConfig {
                learning_rate,
                epochs,
                seed,
                hidden_width: hidden,
                l2_penalty,
                optimizer,
            },
            params,
            vocab_fingerprint,
        })
    }

    /// Hex SHA-256 of the serialized container.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        GcnModel::from_bytes(&fs::read(path)?)
    }

    /// Loads a model and refuses it unless it was trained against `vocab`.
    pub fn load_checked(path: &Path, vocab: &Vocabulary) -> Result<Self, ModelError> {
        let model = GcnModel::load(path)?;
        model.check_vocabulary(vocab)?;
        Ok(model)
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), ModelError> {
        let found = vocab.fingerprint();
        if found != self.vocab_fingerprint {
            return Err(ModelError::VocabularyMismatch {
                expected: self.vocab_fingerprint.clone(),
                found,
            });
        }
        if vocab.dim() != self.dim() {
            return Err(ModelError::BadContainer(format!(
                "model expects width {} but vocabulary has {}",
                self.dim(),
                vocab.dim()
            )));
        }
        Ok(())
    }
}

fn read(r: &mut &[u8], buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf)
        .map_err(|_| ModelError::BadContainer("truncated model header".into()))
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    read(r, &mut buf)?;
    Ok(buf)
}
