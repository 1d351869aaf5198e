//! Cross-entropy on fused per-modality logits.

use crate::error::{Error, Result};
use crate::model::{fuse_logits_backward, FusionWeights};
use crate::tensor::Tensor;

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f32]) -> Vec<f32> {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exp: Vec<f64> = row.iter().map(|v| ((v - max) as f64).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.iter().map(|e| (e / sum) as f32).collect()
}

/// Mean cross-entropy of `softmax(fuse(logits))` against `labels`, and its
/// gradient with respect to the `[B, 3, K]` logits. Fusion and the
/// log-sum-exp run in f64.
pub fn fused_cross_entropy(logits: &Tensor, labels: &[usize], w: &FusionWeights) -> Result<(f64, Tensor)> {
    let (b, m, k) = (logits.dim(0), logits.dim(1), logits.dim(2));
    if labels.len() != b {
        return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidParam(format!("label {bad} out of range for {k} classes")));
    }
    let coeff = w.as_array().map(f64::from);
    let mut loss = 0.0f64;
    let mut dfused = Tensor::zeros(&[b, k]);
    let mut row = vec![0.0f64; k];
    for (i, &y) in labels.iter().enumerate() {
        row.fill(0.0);
        for (mi, c) in coeff.iter().enumerate() {
            for (r, s) in row.iter_mut().zip(&logits.data()[(i * m + mi) * k..][..k]) {
                *r += c * *s as f64;
            }
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        let grad = &mut dfused.data_mut()[i * k..(i + 1) * k];
        for (j, g) in grad.iter_mut().enumerate() {
            let p = (row[j] - lse).exp();
            *g = ((p - if j == y { 1.0 } else { 0.0 }) / b as f64) as f32;
        }
    }
    Ok((loss / b as f64, fuse_logits_backward(&dfused, w)))
}
