//! Fused cross-entropy objective and the momentum-SGD training loop.

pub mod loss;
pub mod optim;
mod run;
mod split;

pub use loss::{fused_cross_entropy, softmax};
pub use optim::{grad_clip, LrSchedule, Sgd};
pub use run::{train, EpochRecord, TrainConfig, TrainOutcome, TrainReport};
pub use split::stratified_split;
