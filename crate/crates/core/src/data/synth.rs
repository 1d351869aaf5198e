//! Synthetic moving-square dataset.
//!
//! Each class is a motion pattern of one bright square drawn on a torus, so
//! every frame taken alone has the same distribution of square position and
//! size whatever the class. Only the order of frames tells classes apart.
//! All patterns are invariant under horizontal flip, which keeps flip
//! augmentation and flip test-time views label-preserving.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::index::{IndexFile, IndexedClip, INDEX_FILE};
use super::{frame_file_name, ClipSplit, Frame, ModalityKind, RawClip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPattern {
    MoveDown,
    MoveUp,
    Grow,
    Shrink,
    MoveDownFast,
    MoveUpFast,
    GrowFast,
    ShrinkFast,
}

impl MotionPattern {
    pub const ALL: [MotionPattern; 8] = [
        MotionPattern::MoveDown,
        MotionPattern::MoveUp,
        MotionPattern::Grow,
        MotionPattern::Shrink,
        MotionPattern::MoveDownFast,
        MotionPattern::MoveUpFast,
        MotionPattern::GrowFast,
        MotionPattern::ShrinkFast,
    ];

    pub fn for_class(k: usize) -> MotionPattern {
        Self::ALL[k % Self::ALL.len()]
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionPattern::MoveDown => "move_down",
            MotionPattern::MoveUp => "move_up",
            MotionPattern::Grow => "grow",
            MotionPattern::Shrink => "shrink",
            MotionPattern::MoveDownFast => "move_down_fast",
            MotionPattern::MoveUpFast => "move_up_fast",
            MotionPattern::GrowFast => "grow_fast",
            MotionPattern::ShrinkFast => "shrink_fast",
        }
    }

    /// (vertical velocity in units of the base speed, signed number of
    /// sweeps through the side range over the clip).
    fn rates(self) -> (f32, f32) {
        match self {
            MotionPattern::MoveDown => (1.0, 0.0),
            MotionPattern::MoveUp => (-1.0, 0.0),
            MotionPattern::Grow => (0.0, 1.0),
            MotionPattern::Shrink => (0.0, -1.0),
            MotionPattern::MoveDownFast => (2.0, 0.0),
            MotionPattern::MoveUpFast => (-2.0, 0.0),
            MotionPattern::GrowFast => (0.0, 2.0),
            MotionPattern::ShrinkFast => (0.0, -2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub clips: usize,
    pub classes: usize,
    pub frames: usize,
    pub size: usize,
    pub seed: u64,
    /// Extra clips written with the `test` split tag.
    pub test_clips: usize,
    /// Replace DEPTH with pure noise (no square), for weak-modality experiments.
    pub depth_noise_only: bool,
}

impl SynthParams {
    pub fn new(clips: usize, classes: usize, frames: usize, size: usize, seed: u64) -> Self {
        SynthParams {
            clips,
            classes,
            frames,
            size,
            seed,
            test_clips: 0,
            depth_noise_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.classes) {
            return Err(Error::InvalidParam(format!(
                "classes must be in 2..=8, got {}",
                self.classes
            )));
        }
        if self.frames < 8 {
            return Err(Error::InvalidParam(format!(
                "frames must be >= 8, got {}",
                self.frames
            )));
        }
        if self.size < 32 {
            return Err(Error::InvalidParam(format!(
                "size must be >= 32, got {}",
                self.size
            )));
        }
        if self.clips == 0 {
            return Err(Error::InvalidParam("clips must be >= 1".into()));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes)
            .map(|k| MotionPattern::for_class(k).name().to_string())
            .collect()
    }
}

/// Writes a synthetic dataset under `out` and returns the dataset root.
pub fn gen_synthetic(params: &SynthParams, out: &Path) -> Result<PathBuf> {
    params.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut entries = Vec::with_capacity(params.clips + params.test_clips);
    let splits = std::iter::repeat_n(ClipSplit::Train, params.clips)
        .chain(std::iter::repeat_n(ClipSplit::Test, params.test_clips));
    let mut per_split = [0usize; 2];
    for (global, split) in splits.enumerate() {
        let local = &mut per_split[split as usize];
        let id = match split {
            ClipSplit::Train => format!("train_{:04}", *local),
            ClipSplit::Test => format!("test_{:04}", *local),
        };
        let label = *local % params.classes;
        *local += 1;

        let clip = synth_clip(params, label, global as u64);
        let mut modalities = std::collections::BTreeMap::new();
        for kind in ModalityKind::ALL {
            let rel = format!("{id}/{}", kind.key());
            let dir = out.join(&rel);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (i, frame) in clip.modality(kind).iter().enumerate() {
                write_png(&dir.join(frame_file_name(i, "png")), frame)?;
            }
            modalities.insert(kind.key().to_string(), rel);
        }
        entries.push(IndexedClip {
            id,
            label,
            frames: params.frames,
            split,
            modalities,
        });
    }

    let index = IndexFile {
        classes: params.class_names(),
        channels: None,
        clips: entries,
    };
    let path = out.join(INDEX_FILE);
    let text = serde_json::to_string_pretty(&index)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(out.to_path_buf())
}

/// Renders one clip in memory. RGB frames have 3 channels, TIR and DEPTH 1.
///
/// `stream` selects an independent random stream under `params.seed`.
pub fn synth_clip(params: &SynthParams, label: usize, stream: u64) -> RawClip {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);

    let size = params.size as f32;
    let base_speed = size / 16.0;
    let side_min = size / 8.0;
    let side_range = size * 3.0 / 8.0;
    let pattern = MotionPattern::for_class(label);
    let (vy, sweeps) = pattern.rates();

    let cx = rng.random_range(0.0..size);
    let cy0 = rng.random_range(0.0..size);
    let side0 = rng.random_range(0.0..side_range);
    let mut color = [
        rng.random_range(120..=255u8),
        rng.random_range(120..=255u8),
        rng.random_range(120..=255u8),
    ];
    color[rng.random_range(0..3)] = 255;

    let mut out: [Vec<Frame>; 3] = Default::default();
    for t in 0..params.frames {
        let tf = t as f32;
        let cy = (cy0 + vy * base_speed * tf).rem_euclid(size);
        let side = if sweeps == 0.0 {
            side_min + side0
        } else {
            // Sawtooth through the whole range; growing and shrinking clips
            // visit the same set of sizes, only in opposite order.
            let phase = (sweeps.abs() * (tf + 0.5) / params.frames as f32).fract();
            let phase = if sweeps > 0.0 { phase } else { 1.0 - phase };
            side_min + side_range * phase
        };
        let cover = coverage(params.size, cx, cy, side);

        let mut rgb = Frame::new(params.size, params.size, 3);
        let mut tir = Frame::new(params.size, params.size, 1);
        let mut depth = Frame::new(params.size, params.size, 1);
        for (p, &a) in cover.iter().enumerate() {
            let bg = [20.0, 20.0, 30.0];
            for c in 0..3 {
                let v = bg[c] * (1.0 - a) + color[c] as f32 * a + noise(&mut rng, 12.0);
                rgb.data[p * 3 + c] = clamp_u8(v);
            }
            tir.data[p] = clamp_u8(40.0 * (1.0 - a) + 210.0 * a + noise(&mut rng, 18.0));
            depth.data[p] = if params.depth_noise_only {
                rng.random::<u8>()
            } else {
                clamp_u8(180.0 * (1.0 - a) + 90.0 * a + noise(&mut rng, 8.0))
            };
        }
        out[0].push(rgb);
        out[1].push(tir);
        out[2].push(depth);
    }

    RawClip {
        id: format!("synthetic_{stream}"),
        label,
        modalities: out,
    }
}

/// Fractional coverage of each pixel by an axis-aligned square centred at
/// (cx, cy) with side `side`, on a torus of width and height `size`.
fn coverage(size: usize, cx: f32, cy: f32, side: f32) -> Vec<f32> {
    let s = size as f32;
    let half = side / 2.0;
    let axis = |center: f32| -> Vec<f32> {
        (0..size)
            .map(|i| {
                let mut d = (i as f32 + 0.5 - center).abs() % s;
                if d > s / 2.0 {
                    d = s - d;
                }
                (half - d + 0.5).clamp(0.0, 1.0)
            })
            .collect()
    };
    let ax = axis(cx);
    let ay = axis(cy);
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            out.push(ax[x] * ay[y]);
        }
    }
    out
}

fn noise(rng: &mut ChaCha8Rng, amp: f32) -> f32 {
    rng.random_range(-amp..=amp)
}

fn clamp_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let color = match frame.channels {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        &frame.data,
        frame.width as u32,
        frame.height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_ranges() {
        let dir = tempfile::tempdir().unwrap();
        for p in [
            SynthParams::new(4, 1, 16, 64, 0),
            SynthParams::new(4, 9, 16, 64, 0),
            SynthParams::new(4, 3, 7, 64, 0),
            SynthParams::new(4, 3, 16, 31, 0),
        ] {
            assert!(matches!(
                gen_synthetic(&p, dir.path()),
                Err(Error::InvalidParam(_))
            ));
        }
    }

    #[test]
    fn coverage_wraps_around_edges() {
        let c = coverage(32, 0.0, 0.0, 4.0);
        // Square centred on the corner covers all four corners of the frame.
        assert_eq!(c[0], 1.0);
        assert_eq!(c[31], 1.0);
        assert_eq!(c[31 * 32], 1.0);
        assert_eq!(c[16 * 32 + 16], 0.0);
    }

    #[test]
    fn noise_only_depth_has_no_square_signal() {
        let mut p = SynthParams::new(1, 3, 8, 32, 3);
        p.depth_noise_only = true;
        let a = synth_clip(&p, 0, 0);
        p.depth_noise_only = false;
        let b = synth_clip(&p, 0, 0);
        assert_ne!(a.modalities[2], b.modalities[2]);
    }
}
