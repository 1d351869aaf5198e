//! On-disk multimodal dataset: index, frame reader and synthetic generator.
//!
//! Layout under a dataset root:
//!
//! ```text
//! index.json
//! <clip>/<modality subdir>/img_00001.png
//! <clip>/<modality subdir>/img_00002.png
//! ...
//! ```
//!
//! `index.json` lists the class names and, per clip, its id, label, frame
//! count and one frame directory per modality.

mod index;
mod reader;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use index::{load_index, ClipSplit, DatasetIndex, IndexFile, IndexedClip, ModalityFrames, MultimodalClip};
pub use reader::{read_clip, stretch_indices, Frame, RawClip};
pub use synth::{gen_synthetic, synth_clip, MotionPattern, SynthParams};

/// The three sensor streams of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityKind {
    Rgb,
    Tir,
    Depth,
}

impl ModalityKind {
    /// Canonical order: RGB, TIR, DEPTH. Logit slot `m` of the model is `ALL[m]`.
    pub const ALL: [ModalityKind; 3] = [ModalityKind::Rgb, ModalityKind::Tir, ModalityKind::Depth];

    pub fn key(self) -> &'static str {
        match self {
            ModalityKind::Rgb => "rgb",
            ModalityKind::Tir => "tir",
            ModalityKind::Depth => "depth",
        }
    }

    pub fn index(self) -> usize {
        match self {
            ModalityKind::Rgb => 0,
            ModalityKind::Tir => 1,
            ModalityKind::Depth => 2,
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Some(ModalityKind::Rgb),
            "tir" => Some(ModalityKind::Tir),
            "depth" => Some(ModalityKind::Depth),
            _ => None,
        }
    }
}

impl fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModalityKind::Rgb => "RGB",
            ModalityKind::Tir => "TIR",
            ModalityKind::Depth => "DEPTH",
        };
        f.write_str(s)
    }
}

/// Channel count used when decoding TIR and DEPTH frames. RGB is always 3.
///
/// With `Three`, single-channel sources are replicated so every modality can
/// share one 3-channel stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChannelPolicy {
    One,
    #[default]
    Three,
}

impl ChannelPolicy {
    pub fn channels(self, kind: ModalityKind) -> usize {
        match (kind, self) {
            (ModalityKind::Rgb, _) => 3,
            (_, ChannelPolicy::One) => 1,
            (_, ChannelPolicy::Three) => 3,
        }
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            1 => Some(ChannelPolicy::One),
            3 => Some(ChannelPolicy::Three),
            _ => None,
        }
    }
}

/// Filename of the `i`-th frame (0-based) in a modality directory.
pub fn frame_file_name(i: usize, ext: &str) -> String {
    format!("img_{:05}.{}", i + 1, ext)
}
