//! Segment-based temporal sampling.
//!
//! A clip of `T` frames is split into `S` equal bins
//! `[floor(i*T/S), floor((i+1)*T/S))`; one frame is taken from each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// One uniform draw per bin (training).
    Random,
    /// Deterministic in-bin positions (evaluation).
    Center,
    /// Evenly strided windows of `S` consecutive frames.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub segments: usize,
    pub mode: SampleMode,
    /// 1 = once sampling, 2 = twice sampling. Ignored in dense mode.
    pub passes: usize,
    /// Window count in dense mode.
    #[serde(default = "default_dense_windows")]
    pub dense_windows: usize,
}

fn default_dense_windows() -> usize {
    10
}

impl SamplerConfig {
    pub fn train(segments: usize) -> Self {
        SamplerConfig {
            segments,
            mode: SampleMode::Random,
            passes: 1,
            dense_windows: default_dense_windows(),
        }
    }

    pub fn test(segments: usize, passes: usize) -> Self {
        SamplerConfig {
            segments,
            mode: SampleMode::Center,
            passes,
            dense_windows: default_dense_windows(),
        }
    }

    /// Number of index lists [`sample_indices`] returns.
    pub fn views(&self) -> usize {
        match self.mode {
            SampleMode::Dense => self.dense_windows.max(1),
            _ => self.passes.max(1),
        }
    }
}

/// Frame indices for each pass; every inner list has `cfg.segments` entries
/// and is non-decreasing.
///
/// * `Random`: pass `p` draws with seed `seed + p`.
/// * `Center`: pass `p` of `P` takes offset `(p + 1/2) / P` of each bin, so a
///   single pass is the bin centre `floor(i*T/S + T/(2S))`.
/// * `Dense`: `dense_windows` runs of `S` consecutive frames with evenly
///   strided starts.
///
/// When `T < S` bins can be empty and index `i` becomes `floor(i*T/S)`,
/// clamped to `T - 1`.
pub fn sample_indices(frames: usize, cfg: &SamplerConfig, seed: u64) -> Vec<Vec<usize>> {
    assert!(frames >= 1, "clip must have at least one frame");
    let t = frames;
    let s = cfg.segments.max(1);
    match cfg.mode {
        SampleMode::Random => (0..cfg.passes.max(1))
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
                (0..s)
                    .map(|i| {
                        let lo = i * t / s;
                        let hi = (i + 1) * t / s;
                        if hi > lo {
                            rng.random_range(lo..hi)
                        } else {
                            lo.min(t - 1)
                        }
                    })
                    .collect()
            })
            .collect(),
        SampleMode::Center => {
            let passes = cfg.passes.max(1);
            (0..passes)
                .map(|p| {
                    (0..s)
                        .map(|i| {
                            // floor(i*T/S + (p + 1/2) * T / (S*P)) in integers
                            let num = 2 * i * t * passes + (2 * p + 1) * t;
                            (num / (2 * s * passes)).min(t - 1)
                        })
                        .collect()
                })
                .collect()
        }
        SampleMode::Dense => {
            let windows = cfg.dense_windows.max(1);
            let span = t.saturating_sub(s);
            (0..windows)
                .map(|w| {
                    let start = if windows == 1 {
                        span / 2
                    } else {
                        (w * span + (windows - 1) / 2) / (windows - 1)
                    };
                    (0..s).map(|j| (start + j).min(t - 1)).collect()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center(t: usize, s: usize) -> Vec<usize> {
        sample_indices(t, &SamplerConfig::test(s, 1), 0).remove(0)
    }

    #[test]
    fn center_closed_form() {
        assert_eq!(center(24, 8), vec![1, 4, 7, 10, 13, 16, 19, 22]);
        assert_eq!(center(8, 8), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn short_clip_repeats_frames() {
        assert_eq!(center(5, 8), vec![0, 0, 1, 2, 2, 3, 4, 4]);
        let r = sample_indices(5, &SamplerConfig::train(8), 3).remove(0);
        assert_eq!(r, vec![0, 0, 1, 1, 2, 3, 3, 4]);
        assert_eq!(center(1, 4), vec![0; 4]);
    }

    #[test]
    fn twice_center_spreads_within_bins() {
        let p = sample_indices(24, &SamplerConfig::test(8, 2), 0);
        assert_eq!(p[0], vec![0, 3, 6, 9, 12, 15, 18, 21]);
        assert_eq!(p[1], vec![2, 5, 8, 11, 14, 17, 20, 23]);
        // one-frame bins leave no room: both passes coincide
        let q = sample_indices(8, &SamplerConfig::test(8, 2), 0);
        assert_eq!(q[0], q[1]);
    }

    #[test]
    fn dense_windows_are_consecutive() {
        let mut cfg = SamplerConfig::test(4, 1);
        cfg.mode = SampleMode::Dense;
        let w = sample_indices(22, &cfg, 0);
        assert_eq!(w.len(), 10);
        assert_eq!(w[0], vec![0, 1, 2, 3]);
        assert_eq!(w[9], vec![18, 19, 20, 21]);
        for win in &w {
            assert!(win.windows(2).all(|p| p[1] == p[0] + 1));
        }
    }

    #[test]
    fn random_passes_use_offset_seeds() {
        let mut cfg = SamplerConfig::train(8);
        cfg.passes = 2;
        let two = sample_indices(100, &cfg, 10);
        let a = sample_indices(100, &SamplerConfig::train(8), 10).remove(0);
        let b = sample_indices(100, &SamplerConfig::train(8), 11).remove(0);
        assert_eq!(two, vec![a, b]);
    }
}
