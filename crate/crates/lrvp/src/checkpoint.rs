//! Model checkpoints.
//!
//! Layout: magic `LRVP`, version u32, config length u32 and UTF-8 TOML config
//! text, then records until end of file: name length u32, name bytes, rank
//! u32, dims u32 each, f32 values. All little-endian.

use std::path::Path;

use lrvp_core::diff::ParamStore;
use lrvp_core::dynamics::Model;
use serde::{Deserialize, Serialize};

use crate::codec::{dim32, put_f32s, put_u32, Reader};
use crate::config::{ModelSection, PenaltyKind};
use crate::error::{format_err, io_err, Result};

pub const MAGIC: &[u8; 4] = b"LRVP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: String,
    pub params: Vec<ParamRecord>,
}

/// Settings the checkpoint was trained with, stored as its config text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub model: ModelSection,
    pub train: TrainMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub lambda: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub penalty: PenaltyKind,
}

impl Checkpoint {
    pub fn from_store(meta: &CheckpointMeta, store: &ParamStore) -> Result<Self> {
        let config = toml::to_string(meta).map_err(|e| format_err(format!("checkpoint config: {e}")))?;
        let params = store
            .iter()
            .map(|(name, t)| ParamRecord {
                name: name.to_string(),
                dims: t.shape().to_vec(),
                values: t.data().iter().map(|&v| v as f32).collect(),
            })
            .collect();
        Ok(Self { version: VERSION, config, params })
    }

    pub fn meta(&self) -> Result<CheckpointMeta> {
        toml::from_str(&self.config).map_err(|e| format_err(format!("checkpoint config: {e}")))
    }

    /// Rebuilds the model and fills every parameter from the records.
    pub fn load_model(&self) -> Result<(Model, ParamStore, CheckpointMeta)> {
        let meta = self.meta()?;
        let (model, mut store) = Model::new(meta.model.to_model_config(), 0)?;
        if self.params.len() != store.len() {
            return Err(format_err(format!("checkpoint has {} parameters, model expects {}", self.params.len(), store.len())));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.params {
            if !seen.insert(p.name.as_str()) {
                return Err(format_err(format!("parameter {} appears twice", p.name)));
            }
            store.set_value(&p.name, &p.dims, p.values.iter().map(|&v| v as f64).collect())?;
        }
        Ok((model, store, meta))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, self.version);
        put_u32(&mut out, dim32(self.config.len(), "config length")?);
        out.extend_from_slice(self.config.as_bytes());
        for p in &self.params {
            let n: usize = p.dims.iter().product();
            if n != p.values.len() {
                return Err(format_err(format!("parameter {}: {} values for dims {:?}", p.name, p.values.len(), p.dims)));
            }
            put_u32(&mut out, dim32(p.name.len(), "name length")?);
            out.extend_from_slice(p.name.as_bytes());
            put_u32(&mut out, dim32(p.dims.len(), "rank")?);
            for &d in &p.dims {
                put_u32(&mut out, dim32(d, "dimension")?);
            }
            put_f32s(&mut out, &p.values);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "LRVP");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version == 0 || version > VERSION {
            return Err(format_err(format!("checkpoint version {version} not supported (newest known is {VERSION})")));
        }
        let len = r.u32()? as usize;
        let config = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| format_err("checkpoint config is not UTF-8"))?;
        let mut params = Vec::new();
        while !r.at_end() {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| format_err("parameter name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| format_err("parameter dims overflow"))?;
            let values = r.f32s(n)?;
            params.push(ParamRecord { name, dims, values });
        }
        Ok(Self { version, config, params })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path).map_err(io_err(path))?)
    }
}
