//! Independent reference implementations and shared fixtures.
#![allow(dead_code)]

use mmtsm::augment::AugmentConfig;
use mmtsm::data::{synth_clip, RawClip, SynthParams};
use mmtsm::model::{ModelConfig, Preset};
use mmtsm::train::TrainConfig;

/// Temporal shift by explicit source-index table: for every output element,
/// the flat index it copies from, or `None` for zero padding.
pub fn shift_oracle(x: &[f32], n: usize, s: usize, c: usize, hw: usize, fold_div: usize) -> Vec<f32> {
    let fold = c / fold_div;
    let mut src: Vec<Option<usize>> = Vec::with_capacity(x.len());
    for frame in 0..n {
        let (g, t) = (frame / s, frame % s);
        for ch in 0..c {
            let from_t: Option<usize> = if ch < fold {
                (t + 1 < s).then_some(t + 1)
            } else if ch < 2 * fold {
                t.checked_sub(1)
            } else {
                Some(t)
            };
            for p in 0..hw {
                src.push(from_t.map(|ft| ((g * s + ft) * c + ch) * hw + p));
            }
        }
    }
    src.iter().map(|i| i.map_or(0.0, |i| x[i])).collect()
}

/// Mean cross-entropy of softmax over fused logits, computed directly from
/// the definition in f64.
pub fn fused_ce_oracle(logits: &[f32], b: usize, k: usize, labels: &[usize], w: [f32; 3]) -> f64 {
    let mut total = 0.0;
    for i in 0..b {
        let z: Vec<f64> = (0..k)
            .map(|j| (0..3).map(|m| w[m] as f64 * logits[(i * 3 + m) * k + j] as f64).sum())
            .collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total += -(z[labels[i]].exp() / denom).ln();
    }
    total / b as f64
}

/// Top-k accuracy by sorting class indices on (score descending, index
/// ascending).
pub fn topk_oracle(scores: &[Vec<f32>], labels: &[usize], k: usize) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(row, &y)| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            order.iter().take(k).any(|&j| j == y)
        })
        .count();
    hits as f64 / scores.len() as f64
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The synthetic dataset as `gen_synthetic` writes it, kept in memory:
/// `(train clips, test clips)`.
pub fn synthetic(params: &SynthParams) -> (Vec<RawClip>, Vec<RawClip>) {
    let train = (0..params.clips)
        .map(|i| synth_clip(params, i % params.classes, i as u64))
        .collect();
    let test = (0..params.test_clips)
        .map(|i| synth_clip(params, i % params.classes, (params.clips + i) as u64))
        .collect();
    (train, test)
}

pub fn desk_model(shift: bool, classes: usize) -> ModelConfig {
    ModelConfig {
        preset: Preset::Deep50,
        width_div: 16,
        segments: 8,
        shift,
        fold_div: 8,
        num_classes: classes,
        in_channels: 3,
    }
}

pub fn desk_augment() -> AugmentConfig {
    AugmentConfig {
        input_size: 56,
        scale_size: 64,
        scales: vec![1.0],
        ..AugmentConfig::default()
    }
}

pub fn desk_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 0.1,
        lr_milestones: vec![11, 14],
        ..TrainConfig::default()
    }
}
