//! WebAssembly bindings for the static demo page in `www/`.

use mmtsm::data::{synth_clip, ModalityKind, MotionPattern, SynthParams};
use mmtsm::model::{temporal_shift, ShiftSpec};
use mmtsm::sampling::{sample_indices, SampleMode, SamplerConfig};
use mmtsm::tensor::Tensor;
use wasm_bindgen::prelude::*;

/// Side of the rendered synthetic frames.
pub const CLIP_SIZE: usize = 64;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Frame indices chosen for a clip of `frames` frames, flattened view by
/// view (each view has `segments` entries). `mode` is `random`, `center`
/// or `dense`.
#[wasm_bindgen]
pub fn sample_frames(frames: usize, segments: usize, mode: &str, passes: usize, seed: u64) -> Result<Vec<u32>, JsError> {
    js(sampled(frames, segments, mode, passes, seed))
}

fn sampled(frames: usize, segments: usize, mode: &str, passes: usize, seed: u64) -> Result<Vec<u32>, String> {
    if frames == 0 || segments == 0 {
        return Err(err("frames and segments must be positive"));
    }
    let mode = match mode {
        "random" => SampleMode::Random,
        "center" => SampleMode::Center,
        "dense" => SampleMode::Dense,
        other => return Err(err(format!("unknown sampling mode {other:?}"))),
    };
    let cfg = SamplerConfig {
        mode,
        passes: passes.max(1),
        ..SamplerConfig::test(segments, 1)
    };
    Ok(sample_indices(frames, &cfg, seed)
        .into_iter()
        .flatten()
        .map(|i| i as u32)
        .collect())
}

/// For every (channel, segment) cell, the segment the shifted feature is
/// read from, or -1 where zero padding enters. Row-major over channels.
#[wasm_bindgen]
pub fn shift_sources(segments: usize, channels: usize, fold_div: usize) -> Result<Vec<i32>, JsError> {
    js(sources(segments, channels, fold_div))
}

fn sources(segments: usize, channels: usize, fold_div: usize) -> Result<Vec<i32>, String> {
    let spec = ShiftSpec { fold_div };
    spec.validate(channels).map_err(err)?;
    // tag each segment's features with (segment + 1); zeros mark padding
    let data = (0..segments)
        .flat_map(|t| std::iter::repeat_n((t + 1) as f32, channels))
        .collect();
    let x = Tensor::from_vec(&[segments, channels, 1, 1], data).map_err(err)?;
    let y = temporal_shift(&x, segments, spec).map_err(err)?;
    Ok((0..channels)
        .flat_map(|c| (0..segments).map(move |t| (t, c)))
        .map(|(t, c)| y.data()[t * channels + c] as i32 - 1)
        .collect())
}

/// Names of the synthetic motion classes, in label order.
#[wasm_bindgen]
pub fn class_names() -> Vec<String> {
    MotionPattern::ALL.iter().map(|p| p.name().to_string()).collect()
}

/// Renders one synthetic clip as consecutive RGBA frames of
/// `CLIP_SIZE x CLIP_SIZE` pixels. `modality` is `rgb`, `tir` or `depth`.
#[wasm_bindgen]
pub fn render_clip(label: usize, frames: usize, seed: u64, modality: &str) -> Result<Vec<u8>, JsError> {
    js(rendered(label, frames, seed, modality))
}

fn rendered(label: usize, frames: usize, seed: u64, modality: &str) -> Result<Vec<u8>, String> {
    let kind = ModalityKind::from_key(modality).ok_or_else(|| err(format!("unknown modality {modality:?}")))?;
    let params = SynthParams::new(1, MotionPattern::ALL.len(), frames, CLIP_SIZE, seed);
    params.validate().map_err(err)?;
    let clip = synth_clip(&params, label % MotionPattern::ALL.len(), 0);
    let mut out = Vec::with_capacity(frames * CLIP_SIZE * CLIP_SIZE * 4);
    for f in clip.modality(kind) {
        for px in f.data.chunks(f.channels) {
            let (r, g, b) = if f.channels == 3 { (px[0], px[1], px[2]) } else { (px[0], px[0], px[0]) };
            out.extend_from_slice(&[r, g, b, 255]);
        }
    }
    Ok(out)
}
