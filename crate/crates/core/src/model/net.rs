use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backbone::{Backbone, Ctx, Preset};
use super::layers::{global_avg_pool, global_avg_pool_backward, Linear, Saved, Tape};
use super::params::{Gradients, ParamStore};
use super::shift::ShiftSpec;
use crate::augment::{ClipStacks, FrameStack};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of modalities folded through the shared backbone.
pub const MODALITIES: usize = 3;

/// Standard deviation of the head's initial weights.
const HEAD_INIT_STD: f32 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Channel widths are divided by this (1 = the standard widths).
    pub width_div: usize,
    pub segments: usize,
    /// Temporal shift on the residual branch of every residual block.
    pub shift: bool,
    pub fold_div: usize,
    pub num_classes: usize,
    pub in_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            preset: Preset::Deep50,
            width_div: 1,
            segments: 8,
            shift: true,
            fold_div: 8,
            num_classes: 20,
            in_channels: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width_div == 0 || self.segments == 0 || self.fold_div < 2 {
            return Err(Error::Config(
                "width_div and segments must be positive and fold_div at least 2".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::Config("in_channels must be 1 or 3".into()));
        }
        Ok(())
    }

    pub fn shift_spec(&self) -> Option<ShiftSpec> {
        self.shift.then_some(ShiftSpec {
            fold_div: self.fold_div,
        })
    }

    /// Hex digest of the canonical JSON form. Two models with equal hashes
    /// have identically named and shaped parameters.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        short_digest(canonical.as_bytes())
    }
}

pub(crate) fn short_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Segment-based residual 2D CNN with temporal shift and a per-modality head.
#[derive(Debug, Clone)]
pub struct TsmModel {
    config: ModelConfig,
    store: ParamStore,
    backbone: Backbone,
    head: Linear,
}

impl TsmModel {
    /// Deterministic random initialisation from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let backbone = Backbone::new(&mut store, config.preset, config.width_div, config.in_channels, &mut rng);
        let head = Linear::new(
            &mut store,
            "fc",
            backbone.features,
            MODALITIES * config.num_classes,
            HEAD_INIT_STD,
            &mut rng,
        );
        Ok(TsmModel {
            config,
            store,
            backbone,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn depth(&self) -> usize {
        self.backbone.depth()
    }

    /// True for parameters belonging to the classification head.
    pub fn is_head_param(name: &str) -> bool {
        name.starts_with("fc.")
    }

    /// Runs `frames` (`[clips * 3 * S, C, H, W]`, ordered clip, modality,
    /// segment) and returns logits `[clips, 3, K]`.
    ///
    /// The segment count is taken from the input, so a model can be
    /// evaluated with a different `S` than it was trained with.
    pub fn forward(&self, frames: Tensor, clips: usize, train: bool, mut tape: Option<&mut Tape>) -> Result<Tensor> {
        let n = frames.dim(0);
        if clips == 0 || n % (clips * MODALITIES) != 0 {
            return Err(Error::Shape(format!(
                "{n} frames cannot be split into {clips} clips x {MODALITIES} modalities"
            )));
        }
        if frames.dim(1) != self.config.in_channels {
            return Err(Error::Shape(format!(
                "input has {} channels, model expects {}",
                frames.dim(1),
                self.config.in_channels
            )));
        }
        let segments = n / (clips * MODALITIES);
        let ctx = Ctx {
            train,
            segments,
            shift: self.config.shift_spec(),
        };
        let maps = self.backbone.forward(&self.store, frames, ctx, tape.as_deref_mut())?;
        let pooled = global_avg_pool(&maps, tape.as_deref_mut());
        if let Some(t) = tape.as_deref_mut() {
            t.push(Saved::Dims(vec![segments]));
        }
        let consensus = segment_mean(&pooled, segments);
        let full = self.head.forward(&self.store, consensus, tape);
        Ok(select_modality_logits(&full, clips, self.config.num_classes))
    }

    /// Gradients of `sum(dlogits * logits)` for the forward pass recorded on `tape`.
    pub fn backward(&self, dlogits: &Tensor, tape: &mut Tape) -> Result<Gradients> {
        let (clips, k) = (dlogits.dim(0), dlogits.dim(2));
        let mut grads = Gradients::zeros_like(&self.store);
        let mut dfull = Tensor::zeros(&[clips * MODALITIES, MODALITIES * k]);
        for b in 0..clips {
            for m in 0..MODALITIES {
                let row = b * MODALITIES + m;
                for j in 0..k {
                    dfull.data_mut()[row * MODALITIES * k + m * k + j] = dlogits.data()[(b * MODALITIES + m) * k + j];
                }
            }
        }
        let dcons = self.head.backward(&self.store, &mut grads, &dfull, tape);
        let segments = match tape.pop() {
            Saved::Dims(d) => d[0],
            _ => panic!("tape out of order: expected segment count"),
        };
        let dpooled = segment_mean_backward(&dcons, segments);
        let dmaps = global_avg_pool_backward(&dpooled, tape);
        let ctx = Ctx {
            train: true,
            segments,
            shift: self.config.shift_spec(),
        };
        self.backbone.backward(&self.store, &mut grads, dmaps, ctx, tape)?;
        Ok(grads)
    }

    /// Folds the batch statistics recorded on `tape` into the running
    /// statistics with an exponential average (`momentum` weight on the batch).
    pub fn commit_bn_stats(&mut self, tape: &Tape, momentum: f32) {
        for obs in tape.bn_observations() {
            for (r, b) in self.store.get_mut(obs.running_mean).iter_mut().zip(&obs.mean) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
            for (r, b) in self.store.get_mut(obs.running_var).iter_mut().zip(&obs.var) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
        }
    }

    /// Cumulative average for recomputing statistics from scratch: after
    /// calls with `count` = 1, 2, ..., n the running statistics equal the
    /// mean of the n batch statistics.
    pub fn accumulate_bn_stats(&mut self, tape: &Tape, count: usize) {
        self.commit_bn_stats(tape, 1.0 / count.max(1) as f32);
    }
}

fn segment_mean(x: &Tensor, segments: usize) -> Tensor {
    let (n, f) = (x.dim(0), x.dim(1));
    let groups = n / segments;
    let mut out = Tensor::zeros(&[groups, f]);
    for g in 0..groups {
        for s in 0..segments {
            let row = &x.data()[(g * segments + s) * f..][..f];
            for (o, v) in out.data_mut()[g * f..(g + 1) * f].iter_mut().zip(row) {
                *o += v / segments as f32;
            }
        }
    }
    out
}

fn segment_mean_backward(d: &Tensor, segments: usize) -> Tensor {
    let (groups, f) = (d.dim(0), d.dim(1));
    let mut out = Tensor::zeros(&[groups * segments, f]);
    for g in 0..groups {
        let row: Vec<f32> = d.data()[g * f..(g + 1) * f].iter().map(|v| v / segments as f32).collect();
        for s in 0..segments {
            out.data_mut()[(g * segments + s) * f..][..f].copy_from_slice(&row);
        }
    }
    out
}

/// Row `b*3 + m` of the head output holds 3 K-vectors; modality `m` keeps slot `m`.
fn select_modality_logits(full: &Tensor, clips: usize, k: usize) -> Tensor {
    let mut out = Tensor::zeros(&[clips, MODALITIES, k]);
    for b in 0..clips {
        for m in 0..MODALITIES {
            let row = b * MODALITIES + m;
            let src = &full.data()[row * MODALITIES * k + m * k..][..k];
            out.data_mut()[(b * MODALITIES + m) * k..][..k].copy_from_slice(src);
        }
    }
    out
}

/// Packs per-clip stacks into the model's `[clips * 3 * S, C, H, W]` input,
/// converting channel counts to `in_channels` (grey replicated to 3, colour
/// averaged to 1).
pub fn build_input(clips: &[ClipStacks], in_channels: usize) -> Result<Tensor> {
    let first = clips
        .first()
        .map(|c| &c[0])
        .ok_or_else(|| Error::Shape("no clips in batch".into()))?;
    let (s, h, w) = (first.segments, first.height, first.width);
    for stacks in clips {
        for st in stacks.iter() {
            if (st.segments, st.height, st.width) != (s, h, w) {
                return Err(Error::Shape(format!(
                    "modality stack [{}, {}, {}] does not match [{s}, {h}, {w}]",
                    st.segments, st.height, st.width
                )));
            }
        }
    }
    let plane = h * w;
    let frame_len = in_channels * plane;
    let mut data = vec![0.0f32; clips.len() * MODALITIES * s * frame_len];
    let mut frame_idx = 0;
    for stacks in clips {
        for st in stacks.iter() {
            for seg in 0..s {
                let out = &mut data[frame_idx * frame_len..(frame_idx + 1) * frame_len];
                write_frame_chw(st, seg, in_channels, out);
                frame_idx += 1;
            }
        }
    }
    Tensor::from_vec(&[clips.len() * MODALITIES * s, in_channels, h, w], data)
}

fn write_frame_chw(st: &FrameStack, seg: usize, in_channels: usize, out: &mut [f32]) {
    let plane = st.height * st.width;
    let c = st.channels;
    let src = &st.data[seg * plane * c..(seg + 1) * plane * c];
    for p in 0..plane {
        let px = &src[p * c..(p + 1) * c];
        match (c, in_channels) {
            (a, b) if a == b => {
                for ch in 0..c {
                    out[ch * plane + p] = px[ch];
                }
            }
            (1, _) => {
                for ch in 0..in_channels {
                    out[ch * plane + p] = px[0];
                }
            }
            _ => {
                out[p] = px.iter().sum::<f32>() / c as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::model::ParamKind;

    fn cfg(preset: Preset, shift: bool) -> ModelConfig {
        ModelConfig {
            preset,
            width_div: 16,
            segments: 3,
            shift,
            fold_div: 8,
            num_classes: 5,
            in_channels: 3,
        }
    }

    fn input(clips: usize, s: usize, hw: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [clips * MODALITIES * s, 3, hw, hw];
        let n = shape.iter().product();
        Tensor::from_vec(&shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn permute_segments(x: &Tensor, s: usize, perm: &[usize]) -> Tensor {
        let frame = x.len() / x.dim(0);
        let mut out = x.clone();
        for g in 0..x.dim(0) / s {
            for (t, &p) in perm.iter().enumerate() {
                let src = &x.data()[(g * s + p) * frame..][..frame];
                out.data_mut()[(g * s + t) * frame..][..frame].copy_from_slice(src);
            }
        }
        out
    }

    /// Residual branches start switched off; turn them on so the shift matters.
    fn open_residuals(model: &mut TsmModel) {
        for p in model.params_mut().params_mut() {
            if p.name.ends_with(".bn3.weight") {
                p.data.fill(1.0);
            }
        }
    }

    #[test]
    fn residual_branches_start_closed() {
        let mut model = TsmModel::new(cfg(Preset::Deep50, true), 3).unwrap();
        let x = input(1, 3, 32, 2);
        let a = model.forward(x.clone(), 1, false, None).unwrap();
        let b = model.forward(permute_segments(&x, 3, &[2, 1, 0]), 1, false, None).unwrap();
        // only the consensus summation order differs
        assert!(a.max_abs_diff(&b) < 1e-6);
        open_residuals(&mut model);
        let c = model.forward(x, 1, false, None).unwrap();
        assert!(a.max_abs_diff(&c) > 0.0);
    }

    #[test]
    fn logits_shape() {
        let model = TsmModel::new(cfg(Preset::Deep50, true), 0).unwrap();
        let y = model.forward(input(2, 3, 32, 1), 2, false, None).unwrap();
        assert_eq!(y.shape(), &[2, 3, 5]);
    }

    #[test]
    fn without_shift_segment_order_is_irrelevant() {
        for preset in [Preset::Deep50, Preset::Mobile] {
            let model = TsmModel::new(cfg(preset, false), 3).unwrap();
            let x = input(1, 3, 32, 2);
            let a = model.forward(x.clone(), 1, false, None).unwrap();
            let b = model.forward(permute_segments(&x, 3, &[2, 0, 1]), 1, false, None).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-5);
        }
    }

    #[test]
    fn with_shift_time_reversal_changes_logits() {
        let mut model = TsmModel::new(cfg(Preset::Deep50, true), 3).unwrap();
        open_residuals(&mut model);
        // a larger head makes the difference visible above float noise
        for p in model.params_mut().params_mut() {
            if p.name == "fc.weight" {
                p.data.iter_mut().for_each(|v| *v *= 100.0);
            }
        }
        let x = input(1, 3, 32, 2);
        let a = model.forward(x.clone(), 1, false, None).unwrap();
        let b = model.forward(permute_segments(&x, 3, &[2, 1, 0]), 1, false, None).unwrap();
        assert!(a.max_abs_diff(&b) > 1e-6);
    }

    #[test]
    fn rejects_bad_batch() {
        let model = TsmModel::new(cfg(Preset::Deep50, true), 0).unwrap();
        assert!(model.forward(input(1, 3, 32, 1), 2, false, None).is_err());
    }

    /// Directional derivative along a random unit direction over all
    /// trainable tensors, and along directions confined to single tensors
    /// at the input, middle and output of the network. Runs with running
    /// statistics: batch statistics over a handful of 4-channel maps make
    /// the objective too kinked for finite differences, and the batch-mode
    /// normalization backward is checked on its own in `layers`.
    #[test]
    fn parameter_gradients_match_finite_differences() {
        for (preset, shift) in [(Preset::Deep50, true), (Preset::Mobile, true), (Preset::Deep50, false)] {
            let mut config = cfg(preset, shift);
            config.width_div = 32;
            let mut model = TsmModel::new(config, 7).unwrap();
            open_residuals(&mut model);
            let x = input(1, 3, 16, 9);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let g = Tensor::from_vec(&[1, 3, 5], (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let objective = |m: &TsmModel| -> f64 {
                let y = m.forward(x.clone(), 1, false, None).unwrap();
                y.data().iter().zip(g.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
            };
            let mut tape = Tape::new();
            model.forward(x.clone(), 1, false, Some(&mut tape)).unwrap();
            let grads = model.backward(&g, &mut tape).unwrap();

            let params = model.params().params();
            let trainable: Vec<usize> = (0..params.len()).filter(|&i| params[i].kind == ParamKind::Trainable).collect();
            let groups: Vec<Vec<usize>> = vec![
                trainable.clone(),
                vec![trainable[0]],
                vec![trainable[trainable.len() / 2]],
                vec![trainable[trainable.len() - 2]],
            ];
            for group in groups {
                let mut dir: Vec<Vec<f32>> = params.iter().map(|p| vec![0.0; p.data.len()]).collect();
                for &i in &group {
                    dir[i].iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                }
                let norm = dir.iter().flatten().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt() as f32;
                let analytic: f64 = dir
                    .iter()
                    .zip(&grads.grads)
                    .flat_map(|(d, gr)| d.iter().zip(gr))
                    .map(|(d, gr)| (*d / norm) as f64 * *gr as f64)
                    .sum();
                let step = 3e-3f32;
                let shifted = |sign: f32, step: f32| {
                    let mut m = model.clone();
                    for (p, d) in m.params_mut().params_mut().iter_mut().zip(&dir) {
                        p.data.iter_mut().zip(d).for_each(|(v, d)| *v += sign * step * d / norm);
                    }
                    objective(&m)
                };
                let numeric = (shifted(1.0, step) - shifted(-1.0, step)) / (2.0 * step as f64);
                assert!(
                    (numeric - analytic).abs() <= 3e-2 * numeric.abs().max(analytic.abs()) + 5e-5,
                    "{preset:?} shift={shift} {:?}: numeric {numeric} analytic {analytic}",
                    group.iter().map(|&i| &params[i].name).take(2).collect::<Vec<_>>()
                );
            }
        }
    }
}
