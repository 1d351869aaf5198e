//! Multi-view, multi-model clip scoring.

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::RawClip;
use crate::error::{Error, Result};
use crate::model::{build_input, fuse_logits, FusionWeights, TsmModel};
use crate::pipeline::eval_views;
use crate::sampling::SamplerConfig;
use crate::train::loss::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub sampler: SamplerConfig,
    /// Adds the horizontally mirrored view of every sampled frame set.
    pub tta_flip: bool,
    pub augment: AugmentConfig,
    pub fusion: FusionWeights,
    /// Clips per forward call; affects speed only.
    pub batch_size: usize,
}

impl EvalConfig {
    /// Centre sampling, one pass, no flip.
    pub fn base(segments: usize, augment: AugmentConfig, fusion: FusionWeights) -> Self {
        EvalConfig {
            sampler: SamplerConfig::test(segments, 1),
            tta_flip: false,
            augment,
            fusion,
            batch_size: 6,
        }
    }
}

/// One ensemble member and its weight.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub model: &'a TsmModel,
    pub weight: f32,
}

/// Fused logits of one model averaged over every view of each clip.
pub fn member_scores(model: &TsmModel, clips: &[RawClip], cfg: &EvalConfig) -> Result<Vec<Vec<f32>>> {
    let k = model.num_classes();
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(cfg.batch_size.max(1)) {
        let mut stacks = Vec::new();
        let mut per_clip = Vec::with_capacity(chunk.len());
        for clip in chunk {
            let views = eval_views(clip, &cfg.sampler, &cfg.augment, cfg.tta_flip)?;
            per_clip.push(views.len());
            stacks.extend(views);
        }
        let x = build_input(&stacks, model.config().in_channels)?;
        let logits = model.forward(x, stacks.len(), false, None)?;
        let fused = fuse_logits(&logits, &cfg.fusion);
        let mut row = 0;
        for &v in &per_clip {
            let mut mean = vec![0.0f32; k];
            for r in row..row + v {
                for (m, s) in mean.iter_mut().zip(&fused.data()[r * k..(r + 1) * k]) {
                    *m += s / v as f32;
                }
            }
            out.push(mean);
            row += v;
        }
    }
    Ok(out)
}

fn check_members(members: &[Member<'_>]) -> Result<usize> {
    let first = members
        .first()
        .ok_or_else(|| Error::Config("ensemble has no members".into()))?;
    let k = first.model.num_classes();
    if let Some(m) = members.iter().find(|m| m.model.num_classes() != k) {
        return Err(Error::Config(format!(
            "ensemble members disagree on class count ({k} vs {})",
            m.model.num_classes()
        )));
    }
    if members.iter().any(|m| !(m.weight >= 0.0 && m.weight.is_finite())) || members.iter().all(|m| m.weight == 0.0) {
        return Err(Error::Config("ensemble weights must be non-negative and not all zero".into()));
    }
    Ok(k)
}

/// Class probabilities per clip: each member's view-averaged fused logits
/// go through a softmax, then members are averaged with their weights.
pub fn predict_clips(members: &[Member<'_>], clips: &[RawClip], cfg: &EvalConfig) -> Result<Vec<Vec<f32>>> {
    let k = check_members(members)?;
    let total: f32 = members.iter().map(|m| m.weight).sum();
    let mut out = vec![vec![0.0f32; k]; clips.len()];
    for m in members {
        if m.weight == 0.0 {
            continue;
        }
        for (acc, s) in out.iter_mut().zip(member_scores(m.model, clips, cfg)?) {
            for (a, p) in acc.iter_mut().zip(softmax(&s)) {
                *a += m.weight * p / total;
            }
        }
    }
    Ok(out)
}

pub fn predict_clip(members: &[Member<'_>], clip: &RawClip, cfg: &EvalConfig) -> Result<Vec<f32>> {
    Ok(predict_clips(members, std::slice::from_ref(clip), cfg)?.remove(0))
}
