//! Binary checkpoints.
//!
//! Layout: `b"AFCK"`, format version (u32 LE), header length in bytes
//! (u32 LE), a UTF-8 JSON header, then every tensor as row-major f64 LE in
//! header order. Nothing follows the last tensor. The header carries a
//! 64-bit FNV-1a of the payload so flipped bits are caught, not loaded.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Task, TrainConfig};
use crate::datapack::ModalitySpec;
use crate::error::{Error, Result};
use crate::model::{fnv1a, ContextModel, IntraClipModel};
use crate::numcore::{ParamStore, Tensor2};

pub const MAGIC: &[u8; 4] = b"AFCK";
pub const VERSION: u32 = 1;

const INTRA: &str = "intra:";
const CONTEXT: &str = "context:";

/// A finished model for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub config: TrainConfig,
    /// Specs of the trained modalities, in ranked order.
    pub modalities: Vec<ModalitySpec>,
    pub ranking: Vec<String>,
    pub intra: IntraClipModel,
    /// Present exactly for valence.
    pub context: Option<ContextModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    task: Task,
    config: TrainConfig,
    modalities: Vec<ModalitySpec>,
    ranking: Vec<String>,
    hidden: usize,
    embed: usize,
    context_hidden: Option<usize>,
    tensors: Vec<TensorEntry>,
    /// Hex FNV-1a of the payload bytes.
    payload_fnv1a: String,
}

impl Checkpoint {
    pub fn expect_task(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::TaskMismatch {
                expected: task.to_string(),
                found: self.task.to_string(),
            });
        }
        Ok(())
    }

    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out: Vec<(String, &Tensor2)> = self
            .intra
            .store
            .iter()
            .map(|(n, p)| (format!("{INTRA}{n}"), &p.value))
            .collect();
        if let Some(ctx) = &self.context {
            out.extend(ctx.store.iter().map(|(n, p)| (format!("{CONTEXT}{n}"), &p.value)));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.tensors();
        let mut payload = Vec::new();
        for (_, t) in &tensors {
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            task: self.task,
            config: self.config.clone(),
            modalities: self.modalities.clone(),
            ranking: self.ranking.clone(),
            hidden: self.intra.hidden,
            embed: self.intra.embed,
            context_hidden: self.context.as_ref().map(|c| c.stack.hidden),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
            payload_fnv1a: format!("{:016x}", fnv1a(&payload)),
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    /// Parses a checkpoint; nothing is returned unless every check passes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Corruption(format!("{} bytes is shorter than the preamble", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() < header_len {
            return Err(Error::Corruption("file ends inside the header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| Error::Corruption(format!("unreadable header: {e}")))?;
        header
            .config
            .validate()
            .map_err(|e| Error::Corruption(format!("header config: {e}")))?;
        let payload = &body[header_len..];
        let expected: usize = header.tensors.iter().map(|t| t.rows * t.cols * 8).sum();
        if payload.len() != expected {
            return Err(Error::Corruption(format!(
                "payload holds {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        if format!("{:016x}", fnv1a(payload)) != header.payload_fnv1a {
            return Err(Error::Corruption("payload checksum mismatch".into()));
        }

        let mut intra_store = ParamStore::new();
        let mut ctx_store = ParamStore::new();
        let mut offset = 0;
        for t in &header.tensors {
            let n = t.rows * t.cols;
            let data: Vec<f64> = payload[offset..offset + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            offset += 8 * n;
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Corruption(format!("non-finite value in {}", t.name)));
            }
            let value = Tensor2::from_vec(t.rows, t.cols, data)?;
            let (store, name) = if let Some(n) = t.name.strip_prefix(INTRA) {
                (&mut intra_store, n)
            } else if let Some(n) = t.name.strip_prefix(CONTEXT) {
                (&mut ctx_store, n)
            } else {
                return Err(Error::Corruption(format!("tensor {} has no model prefix", t.name)));
            };
            store
                .insert(name, value)
                .map_err(|_| Error::Corruption(format!("tensor {} listed twice", t.name)))?;
        }

        let mut ordered = Vec::with_capacity(header.ranking.len());
        for name in &header.ranking {
            let spec = header
                .modalities
                .iter()
                .find(|s| &s.name == name)
                .ok_or_else(|| Error::Corruption(format!("ranked modality {name} has no spec")))?;
            ordered.push(spec.clone());
        }
        let mut intra = IntraClipModel::new(&ordered, header.hidden, header.embed, 0)
            .map_err(|e| Error::Corruption(e.to_string()))?;
        intra.attach_fusion(0)?;
        check_layout(&intra.store, &intra_store, "intra-clip")?;
        intra.store = intra_store;

        let context = match (header.task, header.context_hidden) {
            (Task::Valence, Some(h)) => {
                let mut ctx = ContextModel::new(header.embed, h, 0).map_err(|e| Error::Corruption(e.to_string()))?;
                check_layout(&ctx.store, &ctx_store, "context")?;
                ctx.store = ctx_store;
                Some(ctx)
            }
            (Task::Arousal, None) if ctx_store.is_empty() => None,
            (task, _) => {
                return Err(Error::Corruption(format!(
                    "context model presence does not fit task {task}"
                )))
            }
        };
        Ok(Self {
            task: header.task,
            config: header.config,
            modalities: ordered,
            ranking: header.ranking,
            intra,
            context,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path)?)
    }
}

/// The loaded tensors must be exactly the template's names and shapes.
fn check_layout(template: &ParamStore, loaded: &ParamStore, what: &str) -> Result<()> {
    if template.len() != loaded.len() {
        return Err(Error::Corruption(format!(
            "{what} model has {} tensors, expected {}",
            loaded.len(),
            template.len()
        )));
    }
    for (name, p) in template.iter() {
        let got = loaded
            .get(name)
            .ok_or_else(|| Error::Corruption(format!("{what} tensor {name} missing")))?;
        if got.value.shape() != p.value.shape() {
            return Err(Error::Corruption(format!(
                "{what} tensor {name} has shape {:?}, expected {:?}",
                got.value.shape(),
                p.value.shape()
            )));
        }
    }
    Ok(())
}
