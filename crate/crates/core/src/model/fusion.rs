//! Weighted per-modality logit fusion.

use serde::{Deserialize, Serialize};

use super::net::MODALITIES;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Coefficients applied to the RGB, TIR and DEPTH logits before summing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionWeights {
    pub rgb: f32,
    pub tir: f32,
    pub depth: f32,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            rgb: 1.0,
            tir: 1.0,
            depth: 0.2,
        }
    }
}

impl FusionWeights {
    pub fn new(rgb: f32, tir: f32, depth: f32) -> Result<Self> {
        let w = FusionWeights { rgb, tir, depth };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.as_array();
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("fusion weights must be finite and non-negative, got {all:?}")));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("at least one fusion weight must be positive".into()));
        }
        Ok(())
    }

    /// `[rgb, tir, depth]`, in modality order.
    pub fn as_array(&self) -> [f32; MODALITIES] {
        [self.rgb, self.tir, self.depth]
    }
}

/// `[B, 3, K]` logits to `[B, K]` fused logits.
pub fn fuse_logits(logits: &Tensor, w: &FusionWeights) -> Tensor {
    let (b, m, k) = (logits.dim(0), logits.dim(1), logits.dim(2));
    debug_assert_eq!(m, MODALITIES);
    let coeff = w.as_array();
    let mut out = Tensor::zeros(&[b, k]);
    for i in 0..b {
        let dst = &mut out.data_mut()[i * k..(i + 1) * k];
        for (mi, c) in coeff.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let src = &logits.data()[(i * m + mi) * k..][..k];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }
    out
}

/// Spreads `[B, K]` gradients on the fused logits back to `[B, 3, K]`.
pub fn fuse_logits_backward(dfused: &Tensor, w: &FusionWeights) -> Tensor {
    let (b, k) = (dfused.dim(0), dfused.dim(1));
    let coeff = w.as_array();
    let mut out = Tensor::zeros(&[b, MODALITIES, k]);
    for i in 0..b {
        let src = &dfused.data()[i * k..(i + 1) * k];
        for (mi, c) in coeff.iter().enumerate() {
            let dst = &mut out.data_mut()[(i * MODALITIES + mi) * k..][..k];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = c * s;
            }
        }
    }
    out
}
