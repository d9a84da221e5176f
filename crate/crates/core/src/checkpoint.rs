//! Single-file weight archives.
//!
//! A checkpoint is a safetensors file holding every parameter under its
//! dotted name. The header metadata records the format version, how far the
//! training schedule got, the architecture snapshot the weights belong to and
//! the full run configuration.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use safetensors::SafeTensors;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::JsccModel;
use crate::nn::Init;

pub const FORMAT_VERSION: &str = "1";

const KEY_VERSION: &str = "format_version";
const KEY_STAGES: &str = "completed_stages";
const KEY_EPOCH: &str = "stage_epoch";
const KEY_ARCH: &str = "architecture";
const KEY_CONFIG: &str = "config";

/// Where in the schedule a checkpoint was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageMarker {
    /// Number of schedule stages finished.
    pub completed_stages: usize,
    /// Epochs finished inside the next stage (0 at a stage boundary).
    pub stage_epoch: usize,
}

impl StageMarker {
    pub fn at_boundary(completed_stages: usize) -> Self {
        StageMarker {
            completed_stages,
            stage_epoch: 0,
        }
    }
}

/// Header of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointInfo {
    pub format_version: String,
    pub marker: StageMarker,
    pub architecture: String,
    pub config: Config,
}

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn save(model: &JsccModel, path: impl AsRef<Path>, marker: StageMarker) -> Result<()> {
    let mut meta = HashMap::new();
    meta.insert(KEY_VERSION.to_string(), FORMAT_VERSION.to_string());
    meta.insert(KEY_STAGES.to_string(), marker.completed_stages.to_string());
    meta.insert(KEY_EPOCH.to_string(), marker.stage_epoch.to_string());
    meta.insert(KEY_ARCH.to_string(), model.config.architecture_snapshot());
    meta.insert(KEY_CONFIG.to_string(), model.config.to_text());
    let tensors: Vec<(String, Tensor)> = model
        .store
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.var.as_tensor().clone()))
        .collect();
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    safetensors::serialize_to_file(tensors, Some(meta), path.as_ref()).map_err(|e| ck(e.to_string()))
}

fn parse_info(buffer: &[u8]) -> Result<CheckpointInfo> {
    let (_, header) = SafeTensors::read_metadata(buffer).map_err(|e| ck(e.to_string()))?;
    let meta = header.metadata().as_ref().ok_or_else(|| ck("missing metadata"))?;
    let get = |k: &str| meta.get(k).ok_or_else(|| ck(format!("missing metadata key {k}")));
    let format_version = get(KEY_VERSION)?.clone();
    if format_version != FORMAT_VERSION {
        return Err(ck(format!("unsupported format version {format_version}")));
    }
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| ck(format!("bad {k}"))) };
    Ok(CheckpointInfo {
        marker: StageMarker {
            completed_stages: num(KEY_STAGES)?,
            stage_epoch: num(KEY_EPOCH)?,
        },
        architecture: get(KEY_ARCH)?.clone(),
        config: Config::parse(get(KEY_CONFIG)?)?,
        format_version,
    })
}

pub fn read_info(path: impl AsRef<Path>) -> Result<CheckpointInfo> {
    parse_info(&std::fs::read(path)?)
}

fn assign(model: &JsccModel, buffer: &[u8]) -> Result<()> {
    let tensors = candle_core::safetensors::load_buffer(buffer, model.device())?;
    if tensors.len() != model.store.params().len() {
        return Err(ck(format!(
            "checkpoint holds {} tensors; model has {}",
            tensors.len(),
            model.store.params().len()
        )));
    }
    for p in model.store.params() {
        let t = tensors
            .get(&p.name)
            .ok_or_else(|| ck(format!("missing parameter {}", p.name)))?;
        if t.dims() != p.var.dims() {
            return Err(ck(format!("parameter {} has shape {:?}; expected {:?}", p.name, t.dims(), p.var.dims())));
        }
        p.var.set(&t.to_dtype(model.dtype())?)?;
    }
    Ok(())
}

/// Builds a model from a checkpoint alone.
pub fn load(path: impl AsRef<Path>, device: &Device, dtype: DType) -> Result<(JsccModel, CheckpointInfo)> {
    let buffer = std::fs::read(path)?;
    let info = parse_info(&buffer)?;
    let model = JsccModel::with_init(&info.config, device, dtype, Init::Zeros)?;
    assign(&model, &buffer)?;
    Ok((model, info))
}

/// Loads weights into an existing model; the architecture snapshots must
/// agree.
pub fn load_into(model: &JsccModel, path: impl AsRef<Path>) -> Result<CheckpointInfo> {
    let buffer = std::fs::read(path)?;
    let info = parse_info(&buffer)?;
    if info.architecture != model.config.architecture_snapshot() {
        return Err(ck(format!(
            "config snapshot mismatch\ncheckpoint:\n{}\nmodel:\n{}",
            info.architecture,
            model.config.architecture_snapshot()
        )));
    }
    assign(model, &buffer)?;
    Ok(info)
}
