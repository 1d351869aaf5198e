use std::path::PathBuf;

use thiserror::Error;

use crate::data::ModalityKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing index file {0}")]
    MissingIndex(PathBuf),

    #[error("malformed index {path}: {msg}")]
    BadIndex { path: PathBuf, msg: String },

    #[error("clip {clip}: missing {modality} frames ({detail})")]
    MissingModality {
        clip: String,
        modality: ModalityKind,
        detail: String,
    },

    #[error("clip {clip}: missing frame file {path}")]
    MissingFrame { clip: String, path: PathBuf },

    #[error("clip {clip}: label {label} out of range for {classes} classes")]
    LabelOutOfRange {
        clip: String,
        label: usize,
        classes: usize,
    },

    #[error("duplicate clip id {0}")]
    DuplicateClip(String),

    #[error("cannot decode image {path}: {msg}")]
    Decode { path: PathBuf, msg: String },

    #[error("cannot encode image {path}: {msg}")]
    Encode { path: PathBuf, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error(
        "config hash mismatch: checkpoint has {found}, model expects {expected} \
         (parameters are not shape-compatible)"
    )]
    ConfigHashMismatch { expected: String, found: String },

    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path} already exists (pass --force to overwrite)")]
    OutputExists { path: PathBuf },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
