//! Self-describing checkpoint container.
//!
//! Layout: the 8-byte magic `MMTSMCKP`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header, then every
//! parameter's `f32` values (little-endian) in header order. The header
//! records the model config and its hash, the epoch, the validation score
//! and each parameter's name, shape and kind.
//!
//! Files with no model config (e.g. converted pretrained backbones) can only
//! be used through [`load_pretrained_backbone`].

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{ModelConfig, TsmModel};
use super::params::{Param, ParamKind, ParamStore};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MMTSMCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    #[serde(default)]
    pub model_config: Option<ModelConfig>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub epoch: usize,
    /// Validation Top-1 (or any "higher is better" score).
    #[serde(default)]
    pub score: f64,
    pub params: Vec<ParamEntry>,
}

/// Header plus decoded parameters, without building a model.
#[derive(Debug, Clone)]
pub struct RawCheckpoint {
    pub header: CheckpointHeader,
    pub params: Vec<Param>,
}

fn ckpt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn save_checkpoint(model: &TsmModel, path: &Path, epoch: usize, score: f64) -> Result<()> {
    let cfg = model.config().clone();
    let header = CheckpointHeader {
        config_hash: Some(cfg.hash()),
        model_config: Some(cfg),
        epoch,
        score,
        params: model
            .params()
            .params()
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
                kind: p.kind,
            })
            .collect(),
    };
    write_raw(path, &header, model.params().params())
}

pub(crate) fn write_raw(path: &Path, header: &CheckpointHeader, params: &[Param]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let total: usize = params.iter().map(|p| p.data.len()).sum();
    let mut buf = Vec::with_capacity(20 + json.len() + 4 * total);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for p in params {
        for v in &p.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<RawCheckpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(ckpt_err(path, "not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ckpt_err(path, format!("unsupported format version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(20..20 + hlen)
        .ok_or_else(|| ckpt_err(path, "truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| ckpt_err(path, format!("bad header: {e}")))?;
    let mut offset = 20 + hlen;
    let mut params = Vec::with_capacity(header.params.len());
    for entry in &header.params {
        let n: usize = entry.shape.iter().product();
        let raw = bytes
            .get(offset..offset + 4 * n)
            .ok_or_else(|| ckpt_err(path, format!("truncated data for {}", entry.name)))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        offset += 4 * n;
        params.push(Param {
            name: entry.name.clone(),
            shape: entry.shape.clone(),
            kind: entry.kind,
            data,
        });
    }
    if offset != bytes.len() {
        return Err(ckpt_err(path, format!("{} trailing bytes", bytes.len() - offset)));
    }
    Ok(RawCheckpoint { header, params })
}

impl RawCheckpoint {
    pub fn config(&self, path: &Path) -> Result<&ModelConfig> {
        self.header
            .model_config
            .as_ref()
            .ok_or_else(|| ckpt_err(path, "no model config (pretrained backbone file?)"))
    }

    /// Copies every parameter into `store`, which must have identical names and shapes.
    pub fn copy_into(&self, store: &mut ParamStore, path: &Path) -> Result<()> {
        if store.len() != self.params.len() {
            return Err(ckpt_err(
                path,
                format!("{} parameters in file, model has {}", self.params.len(), store.len()),
            ));
        }
        for (dst, src) in store.params_mut().iter_mut().zip(&self.params) {
            if dst.name != src.name || dst.shape != src.shape {
                return Err(ckpt_err(
                    path,
                    format!("parameter {} {:?} does not match {} {:?}", src.name, src.shape, dst.name, dst.shape),
                ));
            }
            dst.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

/// Loads a checkpoint into a fresh model built from its own config.
pub fn load_checkpoint(path: &Path) -> Result<(TsmModel, CheckpointHeader)> {
    let raw = read_checkpoint(path)?;
    let cfg = raw.config(path)?.clone();
    if let Some(h) = &raw.header.config_hash {
        if *h != cfg.hash() {
            return Err(Error::ConfigHashMismatch {
                expected: cfg.hash(),
                found: h.clone(),
            });
        }
    }
    let mut model = TsmModel::new(cfg, 0)?;
    raw.copy_into(model.params_mut(), path)?;
    Ok((model, raw.header))
}

/// Loads a checkpoint and refuses it unless it was written for `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<(TsmModel, CheckpointHeader)> {
    let raw = read_checkpoint(path)?;
    let found = raw
        .header
        .config_hash
        .clone()
        .unwrap_or_else(|| "<none>".to_string());
    if found != expected.hash() {
        return Err(Error::ConfigHashMismatch {
            expected: expected.hash(),
            found,
        });
    }
    let mut model = TsmModel::new(expected.clone(), 0)?;
    raw.copy_into(model.params_mut(), path)?;
    Ok((model, raw.header))
}

/// What [`load_pretrained_backbone`] did, tensor by tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PretrainedReport {
    /// Backbone tensors copied unchanged.
    pub copied: usize,
    /// Stem tensors whose input-channel count was adapted.
    pub adapted: Vec<String>,
    /// Head tensors left at their fresh initialisation.
    pub fresh_head: usize,
    /// Tensors present in the file but unused by the model.
    pub ignored: Vec<String>,
    /// Scalars taken from the file.
    pub scalars_loaded: usize,
}

/// Loads every non-head tensor of `model` from `path` by name.
///
/// A first-layer kernel with a different input-channel count is adapted:
/// 3 → 1 sums the colour planes, 1 → 3 replicates the plane divided by 3, so
/// a grey image gives the same response either way. The head keeps its
/// fresh initialisation.
pub fn load_pretrained_backbone(model: &mut TsmModel, path: &Path) -> Result<PretrainedReport> {
    let raw = read_checkpoint(path)?;
    let mut report = PretrainedReport::default();
    let mut used = vec![false; raw.params.len()];
    for dst in model.params_mut().params_mut() {
        if TsmModel::is_head_param(&dst.name) {
            report.fresh_head += 1;
            continue;
        }
        let (i, src) = raw
            .params
            .iter()
            .enumerate()
            .find(|(_, p)| p.name == dst.name)
            .ok_or_else(|| ckpt_err(path, format!("pretrained file lacks {}", dst.name)))?;
        used[i] = true;
        if src.shape == dst.shape {
            dst.data.copy_from_slice(&src.data);
            report.copied += 1;
        } else if let Some(data) = adapt_input_channels(src, &dst.shape) {
            dst.data = data;
            report.adapted.push(dst.name.clone());
        } else {
            return Err(ckpt_err(
                path,
                format!("{} has shape {:?}, model expects {:?}", src.name, src.shape, dst.shape),
            ));
        }
        report.scalars_loaded += dst.data.len();
    }
    report.ignored = raw
        .params
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(p, _)| p.name.clone())
        .collect();
    Ok(report)
}

fn adapt_input_channels(src: &Param, want: &[usize]) -> Option<Vec<f32>> {
    let (s, w) = (&src.shape, want);
    if s.len() != 4 || w.len() != 4 || s[0] != w[0] || s[2..] != w[2..] {
        return None;
    }
    let (out, kk) = (s[0], s[2] * s[3]);
    let mut data = vec![0.0f32; out * w[1] * kk];
    match (s[1], w[1]) {
        (3, 1) => {
            for o in 0..out {
                for c in 0..3 {
                    for j in 0..kk {
                        data[o * kk + j] += src.data[(o * 3 + c) * kk + j];
                    }
                }
            }
        }
        (1, 3) => {
            for o in 0..out {
                for c in 0..3 {
                    for j in 0..kk {
                        data[(o * 3 + c) * kk + j] = src.data[o * kk + j] / 3.0;
                    }
                }
            }
        }
        _ => return None,
    }
    Some(data)
}

/// Writes only the backbone tensors of `model`, without a model config, in
/// the form [`load_pretrained_backbone`] accepts.
pub fn save_backbone(model: &TsmModel, path: &Path) -> Result<()> {
    let params: Vec<Param> = model
        .params()
        .params()
        .iter()
        .filter(|p| !TsmModel::is_head_param(&p.name))
        .cloned()
        .collect();
    let header = CheckpointHeader {
        model_config: None,
        config_hash: None,
        epoch: 0,
        score: 0.0,
        params: params
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
                kind: p.kind,
            })
            .collect(),
    };
    write_raw(path, &header, &params)
}
