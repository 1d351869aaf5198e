//! Inference stack: weight averaging, multi-view and multi-model scoring,
//! metrics and sweeps.

pub mod metrics;
pub mod predict;
pub mod swa;
pub mod sweep;

pub use metrics::{argmax, evaluate, rank_of, score_metrics, EvalResult};
pub use predict::{member_scores, predict_clip, predict_clips, EvalConfig, Member};
pub use swa::{recompute_bn_stats, swa_average, CheckpointEntry, CheckpointSet, SCORES_FILE};
pub use sweep::{sweep, SweepAxis, SweepRow, SweepTable};
