//! Group augmentation: one random draw per clip, applied to every frame of
//! every modality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Frame, ModalityKind, RawClip};
use crate::error::{Error, Result};

/// Sampled, augmented frames of one modality, `[segments, height, width, channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub segments: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FrameStack {
    pub fn zeros(segments: usize, height: usize, width: usize, channels: usize) -> Self {
        FrameStack {
            segments,
            height,
            width,
            channels,
            data: vec![0.0; segments * height * width * channels],
        }
    }

    #[inline]
    pub fn at(&self, s: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[((s * self.height + y) * self.width + x) * self.channels + c]
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// One stack per modality, indexed by [`ModalityKind::index`].
pub type ClipStacks = [FrameStack; 3];

/// Frames picked by the sampler, borrowed from a decoded clip.
pub type SampledFrames<'a> = [Vec<&'a Frame>; 3];

pub fn select_frames<'a>(clip: &'a RawClip, indices: &[usize]) -> SampledFrames<'a> {
    let pick = |kind: ModalityKind| indices.iter().map(|&i| &clip.modality(kind)[i]).collect();
    [
        pick(ModalityKind::Rgb),
        pick(ModalityKind::Tir),
        pick(ModalityKind::Depth),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Side of the square network input.
    pub input_size: usize,
    /// Short-side target of the test-time scale step.
    pub scale_size: usize,
    /// Multi-scale crop sides as fractions of the shorter frame side.
    pub scales: Vec<f32>,
    pub flip_prob: f32,
    /// Per-channel statistics on the 0..1 scale. A single entry applies to all channels.
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            input_size: 224,
            scale_size: 256,
            scales: vec![1.0, 0.875, 0.75, 0.66],
            flip_prob: 0.5,
            mean: vec![0.5],
            std: vec![0.5],
        }
    }
}

pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.scale_size == 0 {
            return Err(Error::Config("input_size and scale_size must be positive".into()));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("scales must be a non-empty list of positive fractions".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!("flip_prob {} outside [0, 1]", self.flip_prob)));
        }
        check_stats(&self.mean, &self.std)
    }
}

fn check_stats(mean: &[f32], std: &[f32]) -> Result<()> {
    if mean.is_empty() || std.is_empty() {
        return Err(Error::Config("normalization mean/std must not be empty".into()));
    }
    if let Some(s) = std.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Config(format!("normalization std must be > 0, got {s}")));
    }
    Ok(())
}

/// A crop rectangle in fractions of the frame (x, y, width, height).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelRect {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

/// The per-clip random draw of the training pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupDraw {
    pub scale: f32,
    pub rect: RelRect,
    pub flip: bool,
}

/// Record of the transform applied to one frame, for coherence audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedTransform {
    pub modality: ModalityKind,
    pub frame: usize,
    pub rect: RelRect,
    pub flip: bool,
}

const MAX_SCALE_RETRIES: usize = 8;

/// Draws the clip-level crop and flip. `reference` is the (width, height)
/// the scale fractions refer to; `limits` are the sizes of every modality.
pub fn draw_group(
    cfg: &AugmentConfig,
    reference: (usize, usize),
    limits: &[(usize, usize)],
    rng: &mut impl Rng,
) -> GroupDraw {
    let (rw, rh) = (reference.0 as f32, reference.1 as f32);
    let short = rw.min(rh);
    let fits = |scale: f32| {
        let (wf, hf) = (scale * short / rw, scale * short / rh);
        wf <= 1.0
            && hf <= 1.0
            && limits
                .iter()
                .all(|&(w, h)| wf * w as f32 >= 1.0 && hf * h as f32 >= 1.0)
    };
    let mut scale = None;
    for _ in 0..MAX_SCALE_RETRIES {
        let s = cfg.scales[rng.random_range(0..cfg.scales.len())];
        if fits(s) {
            scale = Some(s);
            break;
        }
    }
    let scale = scale.unwrap_or_else(|| cfg.scales.iter().copied().fold(f32::INFINITY, f32::min).min(1.0));
    let w = (scale * short / rw).min(1.0);
    let h = (scale * short / rh).min(1.0);
    let x = rng.random_range(0.0..=(1.0 - w));
    let y = rng.random_range(0.0..=(1.0 - h));
    let flip = rng.random_bool(cfg.flip_prob as f64);
    GroupDraw {
        scale,
        rect: RelRect { x, y, w, h },
        flip,
    }
}

/// Training pipeline: group multi-scale crop, group horizontal flip, resize
/// to `input_size`, normalize.
pub fn apply_train_augment(frames: &SampledFrames<'_>, cfg: &AugmentConfig, seed: u64) -> Result<ClipStacks> {
    apply_train_augment_traced(frames, cfg, seed, None).map(|(s, _)| s)
}

pub fn apply_train_augment_traced(
    frames: &SampledFrames<'_>,
    cfg: &AugmentConfig,
    seed: u64,
    mut trace: Option<&mut Vec<AppliedTransform>>,
) -> Result<(ClipStacks, GroupDraw)> {
    cfg.validate()?;
    let dims: Vec<(usize, usize)> = frames
        .iter()
        .filter_map(|f| f.first().map(|fr| (fr.width, fr.height)))
        .collect();
    let reference = *dims
        .first()
        .ok_or_else(|| Error::Shape("no frames to augment".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = draw_group(cfg, reference, &dims, &mut rng);

    let stacks = build_stacks(frames, cfg, |kind, i, frame, out| {
        let rect = draw.rect;
        let px = (
            rect.x * frame.width as f32,
            rect.y * frame.height as f32,
            rect.w * frame.width as f32,
            rect.h * frame.height as f32,
        );
        resample(frame, px, cfg.input_size, cfg.input_size, draw.flip, out);
        if let Some(t) = trace.as_deref_mut() {
            t.push(AppliedTransform {
                modality: kind,
                frame: i,
                rect,
                flip: draw.flip,
            });
        }
    })?;
    Ok((stacks, draw))
}

/// Test pipeline: scale the short side to `scale_size`, centre-crop
/// `input_size`, optionally flip, normalize.
///
/// The crop offset is `floor((scaled - input_size) / 2)` on each axis.
pub fn apply_test_augment(frames: &SampledFrames<'_>, cfg: &AugmentConfig, tta_flip: bool) -> Result<ClipStacks> {
    cfg.validate()?;
    build_stacks(frames, cfg, |_, _, frame, out| {
        let rect = center_crop_rect(frame.width, frame.height, cfg.scale_size, cfg.input_size);
        resample(frame, rect, cfg.input_size, cfg.input_size, tta_flip, out);
    })
}

/// Source-pixel rectangle of the test-time scale + centre crop.
pub fn center_crop_rect(width: usize, height: usize, scale_size: usize, out: usize) -> (f32, f32, f32, f32) {
    let short = width.min(height) as f64;
    let sw = (width as f64 * scale_size as f64 / short).round() as i64;
    let sh = (height as f64 * scale_size as f64 / short).round() as i64;
    let x0 = (sw - out as i64).div_euclid(2);
    let y0 = (sh - out as i64).div_euclid(2);
    let fx = width as f64 / sw as f64;
    let fy = height as f64 / sh as f64;
    (
        (x0 as f64 * fx) as f32,
        (y0 as f64 * fy) as f32,
        (out as f64 * fx) as f32,
        (out as f64 * fy) as f32,
    )
}

fn build_stacks(
    frames: &SampledFrames<'_>,
    cfg: &AugmentConfig,
    mut fill: impl FnMut(ModalityKind, usize, &Frame, &mut [f32]),
) -> Result<ClipStacks> {
    let segments = frames[0].len();
    if frames.iter().any(|f| f.len() != segments) {
        return Err(Error::Shape("modalities have different segment counts".into()));
    }
    let size = cfg.input_size;
    let mut stacks: Vec<FrameStack> = Vec::with_capacity(3);
    for kind in ModalityKind::ALL {
        let list = &frames[kind.index()];
        let channels = list.first().map(|f| f.channels).unwrap_or(3);
        let mut stack = FrameStack::zeros(segments, size, size, channels);
        let flen = stack.frame_len();
        for (i, frame) in list.iter().enumerate() {
            if frame.channels != channels {
                return Err(Error::Shape(format!("{kind} frames have mixed channel counts")));
            }
            fill(kind, i, frame, &mut stack.data[i * flen..(i + 1) * flen]);
        }
        normalize_in_place(&mut stack, &cfg.mean, &cfg.std)?;
        stacks.push(stack);
    }
    let mut it = stacks.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// Bilinear resample of the source rectangle `(x, y, w, h)` (pixels) onto an
/// `ow x oh` grid, values kept on the 0..255 scale.
pub fn resample(frame: &Frame, rect: (f32, f32, f32, f32), ow: usize, oh: usize, flip: bool, out: &mut [f32]) {
    let c = frame.channels;
    let (rx, ry, rw, rh) = rect;
    let max_x = (frame.width - 1) as f32;
    let max_y = (frame.height - 1) as f32;
    let xs: Vec<(usize, usize, f32)> = (0..ow)
        .map(|ox| {
            let sx = (rx + (ox as f32 + 0.5) * rw / ow as f32 - 0.5).clamp(0.0, max_x);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(frame.width - 1);
            (x0, x1, sx - x0 as f32)
        })
        .collect();
    for oy in 0..oh {
        let sy = (ry + (oy as f32 + 0.5) * rh / oh as f32 - 0.5).clamp(0.0, max_y);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(frame.height - 1);
        let fy = sy - y0 as f32;
        for ox in 0..ow {
            let (x0, x1, fx) = xs[ox];
            let dst_x = if flip { ow - 1 - ox } else { ox };
            let dst = (oy * ow + dst_x) * c;
            for ch in 0..c {
                let p00 = frame.get(x0, y0, ch) as f32;
                let p01 = frame.get(x1, y0, ch) as f32;
                let p10 = frame.get(x0, y1, ch) as f32;
                let p11 = frame.get(x1, y1, ch) as f32;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                out[dst + ch] = top + (bottom - top) * fy;
            }
        }
    }
}

/// `out = (in / 255 - mean) / std`, per channel.
pub fn normalize(stack: &FrameStack, mean: &[f32], std: &[f32]) -> Result<FrameStack> {
    let mut out = stack.clone();
    normalize_in_place(&mut out, mean, std)?;
    Ok(out)
}

/// Inverse of [`normalize`].
pub fn denormalize(stack: &FrameStack, mean: &[f32], std: &[f32]) -> Result<FrameStack> {
    check_stats(mean, std)?;
    let mut out = stack.clone();
    let c = out.channels;
    for (i, v) in out.data.iter_mut().enumerate() {
        let ch = i % c;
        *v = (*v * stat(std, ch) + stat(mean, ch)) * 255.0;
    }
    Ok(out)
}

fn normalize_in_place(stack: &mut FrameStack, mean: &[f32], std: &[f32]) -> Result<()> {
    check_stats(mean, std)?;
    let c = stack.channels;
    let scale: Vec<f32> = (0..c).map(|ch| 1.0 / (255.0 * stat(std, ch))).collect();
    let shift: Vec<f32> = (0..c).map(|ch| stat(mean, ch) / stat(std, ch)).collect();
    for (i, v) in stack.data.iter_mut().enumerate() {
        let ch = i % c;
        *v = *v * scale[ch] - shift[ch];
    }
    Ok(())
}

fn stat(v: &[f32], ch: usize) -> f32 {
    if v.len() == 1 {
        v[0]
    } else {
        v[ch.min(v.len() - 1)]
    }
}

/// Mirrors every frame of a stack left-right.
pub fn flip_stack(stack: &FrameStack) -> FrameStack {
    let mut out = stack.clone();
    let (w, c) = (stack.width, stack.channels);
    for s in 0..stack.segments {
        for y in 0..stack.height {
            for x in 0..w {
                for ch in 0..c {
                    out.data[((s * stack.height + y) * w + x) * c + ch] = stack.at(s, y, w - 1 - x, ch);
                }
            }
        }
    }
    out
}
