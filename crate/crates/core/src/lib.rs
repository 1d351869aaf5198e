//! Multimodal (RGB / thermal / depth) action recognition built on a
//! temporal-shift 2D residual network.
//!
//! The crate is organised the way data flows through a run:
//!
//! * [`data`] reads the on-disk frame-folder format and generates the
//!   synthetic moving-square dataset used for desk-scale checks.
//! * [`sampling`] and [`augment`] turn a clip into per-modality frame stacks
//!   (segment sampling, group crop/flip, normalization).
//! * [`model`] holds the temporal shift, the backbone presets, the
//!   per-modality head, logit fusion and the checkpoint container.
//! * [`train`] implements the fused cross-entropy objective and the
//!   momentum-SGD loop.
//! * [`scoring`] covers weight averaging, test-time flip, ensembling,
//!   multi-pass sampling, top-k metrics and parameter sweeps.
//! * [`config`] and [`cli`] tie everything into reproducible runs.

pub mod augment;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod sampling;
pub mod scoring;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
