//! The temporal-shift network: shift operator, layers, backbone presets,
//! per-modality head, logit fusion and checkpoints.

mod backbone;
pub mod checkpoint;
pub mod fusion;
pub mod layers;
mod net;
pub mod params;
pub mod shift;

pub use backbone::Preset;
pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, load_pretrained_backbone, read_checkpoint, save_backbone, save_checkpoint,
    CheckpointHeader, PretrainedReport, RawCheckpoint,
};
pub use fusion::{fuse_logits, fuse_logits_backward, FusionWeights};
pub use layers::Tape;
pub(crate) use net::short_digest;
pub use net::{build_input, ModelConfig, TsmModel, MODALITIES};
pub use params::{Gradients, Param, ParamId, ParamKind, ParamStore};
pub use shift::{temporal_shift, temporal_shift_adjoint, ShiftSpec};
