//! Clip-to-stack plumbing shared by training and scoring.

use crate::augment::{apply_test_augment, apply_train_augment, select_frames, AugmentConfig, ClipStacks};
use crate::data::RawClip;
use crate::error::Result;
use crate::sampling::{sample_indices, SamplerConfig};

/// Derives an independent 64-bit seed from a base seed and two counters
/// (splitmix64 finaliser over the mixed inputs).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random segment sampling plus group augmentation for one training clip.
pub fn train_view(clip: &RawClip, segments: usize, aug: &AugmentConfig, seed: u64) -> Result<ClipStacks> {
    let indices = sample_indices(clip.frames(), &SamplerConfig::train(segments), seed).remove(0);
    apply_train_augment(&select_frames(clip, &indices), aug, derive_seed(seed, 1, 0))
}

/// Every deterministic evaluation view of a clip: one per sampling pass,
/// times two when `tta_flip` adds the mirrored view.
pub fn eval_views(clip: &RawClip, sampler: &SamplerConfig, aug: &AugmentConfig, tta_flip: bool) -> Result<Vec<ClipStacks>> {
    let mut views = Vec::new();
    for indices in sample_indices(clip.frames(), sampler, 0) {
        let frames = select_frames(clip, &indices);
        views.push(apply_test_augment(&frames, aug, false)?);
        if tta_flip {
            views.push(apply_test_augment(&frames, aug, true)?);
        }
    }
    Ok(views)
}
