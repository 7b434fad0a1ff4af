//! Checkpoint files: a JSON manifest plus a sibling `.bin` payload of
//! little-endian f32 values concatenated in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::transformer::Model;
use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::tensor::{DType, Float, Tensor};

const FORMAT_VERSION: u32 = 1;

/// Run metadata stored next to the weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub task: String,
    pub seed: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: usize,
    pub dtype: DType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config: ModelConfig,
    #[serde(flatten)]
    pub meta: CheckpointMeta,
    /// File name of the payload, relative to the manifest.
    pub payload: String,
    pub payload_bytes: usize,
    pub sha256: String,
    pub params: Vec<ParamEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub meta: CheckpointMeta,
}

/// Payload path for a manifest path: same stem, `.bin` extension.
pub fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `path` (manifest) and its `.bin` payload. Weights are stored as f32
/// regardless of `F`.
pub fn save_checkpoint<F: Float>(model: &Model<F>, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let mut payload = Vec::with_capacity(model.params().num_elements() * 4);
    let mut params = Vec::with_capacity(model.params().len());
    for p in model.params().iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset: payload.len(),
            dtype: DType::F32,
        });
        for &x in p.value.data() {
            (x.f64() as f32).write_le(&mut payload);
        }
    }
    let bin = payload_path(path);
    let manifest = Manifest {
        format: FORMAT_VERSION,
        config: model.config().clone(),
        meta: meta.clone(),
        payload: bin
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Checkpoint(format!("bad checkpoint path {}", path.display())))?
            .to_string(),
        payload_bytes: payload.len(),
        sha256: hex::encode(Sha256::digest(&payload)),
        params,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&bin, &payload)?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    if manifest.format != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {}", manifest.format)));
    }
    manifest.config.validate()?;
    let bin = path.with_file_name(&manifest.payload);
    let payload = fs::read(&bin)?;

    let mut store = ParamStore::new();
    let mut expected_offset = 0;
    for entry in &manifest.params {
        if entry.dtype != DType::F32 {
            return Err(Error::Checkpoint(format!("parameter `{}` has unsupported dtype", entry.name)));
        }
        if entry.offset != expected_offset {
            return Err(Error::Checkpoint(format!(
                "parameter `{}` starts at byte {}, expected {}",
                entry.name, entry.offset, expected_offset
            )));
        }
        let count: usize = entry.shape.iter().product();
        let end = entry.offset + count * 4;
        if end > payload.len() {
            return Err(Error::Checkpoint(format!(
                "payload truncated inside parameter `{}` ({} of {} bytes present)",
                entry.name,
                payload.len().saturating_sub(entry.offset),
                count * 4
            )));
        }
        let data: Vec<f32> = payload[entry.offset..end].chunks_exact(4).map(f32::read_le).collect();
        let value = Tensor::new(&entry.shape, data)
            .map_err(|e| Error::Checkpoint(format!("parameter `{}`: {e}", entry.name)))?;
        store.add(entry.name.clone(), value)?;
        expected_offset = end;
    }
    if payload.len() != expected_offset || payload.len() != manifest.payload_bytes {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, manifest describes {}",
            payload.len(),
            expected_offset
        )));
    }
    let digest = hex::encode(Sha256::digest(&payload));
    if digest != manifest.sha256 {
        return Err(Error::Checkpoint(format!(
            "payload checksum mismatch: manifest {}, file {}",
            manifest.sha256, digest
        )));
    }
    let model = Model::from_params(manifest.config, store)?;
    Ok(Checkpoint {
        model,
        meta: manifest.meta,
    })
}
