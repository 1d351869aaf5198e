mod common;

use common::shift_oracle;
use mmtsm::augment::{denormalize, flip_stack, normalize, FrameStack};
use mmtsm::model::{temporal_shift, temporal_shift_adjoint, ShiftSpec};
use mmtsm::sampling::{sample_indices, SampleMode, SamplerConfig};
use mmtsm::tensor::Tensor;
use proptest::prelude::*;

fn shift_case() -> impl Strategy<Value = (usize, usize, usize, usize, usize, Vec<f32>)> {
    (1usize..3, 1usize..6, 1usize..17, 1usize..5, 1usize..9).prop_flat_map(|(n, s, c, hw, fold_div)| {
        let len = n * s * c * hw;
        (
            Just(n),
            Just(s),
            Just(c),
            Just(hw),
            Just(fold_div.max(2)),
            proptest::collection::vec(-10.0f32..10.0, len),
        )
    })
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

proptest! {
    #[test]
    fn shift_matches_index_oracle((n, s, c, hw, fold_div, x) in shift_case()) {
        let t = Tensor::from_vec(&[n * s, c, hw, 1], x.clone()).unwrap();
        let got = temporal_shift(&t, s, ShiftSpec { fold_div }).unwrap();
        prop_assert_eq!(got.data(), &shift_oracle(&x, n * s, s, c, hw, fold_div)[..]);
    }

    #[test]
    fn shift_is_linear((n, s, c, hw, fold_div, x) in shift_case(), a in -3.0f32..3.0) {
        let spec = ShiftSpec { fold_div };
        let y: Vec<f32> = x.iter().rev().copied().collect();
        let shape = [n * s, c, hw, 1];
        let combo: Vec<f32> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let lhs = temporal_shift(&Tensor::from_vec(&shape, combo).unwrap(), s, spec).unwrap();
        let sx = temporal_shift(&Tensor::from_vec(&shape, x).unwrap(), s, spec).unwrap();
        let sy = temporal_shift(&Tensor::from_vec(&shape, y).unwrap(), s, spec).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(sx.data()).zip(sy.data()) {
            prop_assert!((l - (a * p + q)).abs() <= 1e-4 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity((n, s, c, hw, fold_div, x) in shift_case()) {
        let spec = ShiftSpec { fold_div };
        let shape = [n * s, c, hw, 1];
        let g: Vec<f32> = x.iter().enumerate().map(|(i, v)| (i as f32 * 0.37).sin() - v * 0.1).collect();
        let sx = temporal_shift(&Tensor::from_vec(&shape, x.clone()).unwrap(), s, spec).unwrap();
        let ag = temporal_shift_adjoint(&Tensor::from_vec(&shape, g.clone()).unwrap(), s, spec).unwrap();
        let (l, r) = (dot(sx.data(), &g), dot(&x, ag.data()));
        prop_assert!((l - r).abs() <= 1e-6 * (1.0 + l.abs()), "{} vs {}", l, r);
    }

    #[test]
    fn random_sampling_stays_in_bins(frames in 1usize..200, segments in 1usize..20, seed in any::<u64>()) {
        let idx = sample_indices(frames, &SamplerConfig::train(segments), seed).remove(0);
        prop_assert_eq!(idx.len(), segments);
        for (i, &f) in idx.iter().enumerate() {
            let (lo, hi) = (i * frames / segments, (i + 1) * frames / segments);
            if hi > lo {
                prop_assert!((lo..hi).contains(&f));
            } else {
                prop_assert_eq!(f, lo.min(frames - 1));
            }
        }
    }

    #[test]
    fn center_passes_overlap_their_bins(frames in 1usize..200, segments in 1usize..20, passes in 1usize..4) {
        for idx in sample_indices(frames, &SamplerConfig::test(segments, passes), 0) {
            prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            // offsets are fractions of the real-valued bin [i*T/S, (i+1)*T/S),
            // so frame f must overlap it
            for (i, &f) in idx.iter().enumerate() {
                prop_assert!(f < frames);
                if frames >= segments {
                    prop_assert!(f * segments < (i + 1) * frames && (f + 1) * segments > i * frames);
                }
            }
        }
    }

    #[test]
    fn normalize_round_trips(
        data in proptest::collection::vec(0.0f32..255.0, 2 * 3 * 4 * 3),
        mean in proptest::collection::vec(0.0f32..1.0, 3),
        std in proptest::collection::vec(0.05f32..2.0, 3),
    ) {
        let stack = FrameStack { segments: 2, height: 3, width: 4, channels: 3, data };
        let back = denormalize(&normalize(&stack, &mean, &std).unwrap(), &mean, &std).unwrap();
        for (a, b) in stack.data.iter().zip(&back.data) {
            prop_assert!((a - b).abs() < 1e-3, "{} vs {}", a, b);
        }
    }

    #[test]
    fn flip_is_an_involution(data in proptest::collection::vec(-1.0f32..1.0, 2 * 3 * 5 * 2)) {
        let stack = FrameStack { segments: 2, height: 3, width: 5, channels: 2, data };
        let once = flip_stack(&stack);
        prop_assert_eq!(once.at(1, 2, 0, 1), stack.at(1, 2, 4, 1));
        prop_assert_eq!(flip_stack(&once), stack);
    }
}

#[test]
fn twice_center_sampling_equals_once_when_frames_equal_segments() {
    for s in 1..24 {
        let once = sample_indices(s, &SamplerConfig::test(s, 1), 0);
        let twice = sample_indices(s, &SamplerConfig::test(s, 2), 0);
        assert_eq!(once, vec![(0..s).collect::<Vec<_>>()]);
        assert_eq!(twice, vec![once[0].clone(), once[0].clone()]);
    }
}

#[test]
fn center_single_pass_is_bin_centre() {
    for (t, s) in [(16, 8), (17, 8), (100, 8), (5, 8), (30, 7)] {
        let idx = sample_indices(t, &SamplerConfig::test(s, 1), 0).remove(0);
        let want: Vec<usize> = (0..s).map(|i| ((2 * i * t + t) / (2 * s)).min(t - 1)).collect();
        assert_eq!(idx, want, "T={t} S={s}");
    }
}

#[test]
fn dense_windows_are_consecutive_runs() {
    let cfg = SamplerConfig {
        segments: 8,
        mode: SampleMode::Dense,
        passes: 1,
        dense_windows: 10,
    };
    let views = sample_indices(64, &cfg, 0);
    assert_eq!(views.len(), 10);
    assert_eq!(views[0][0], 0);
    assert_eq!(views[9][0], 56);
    for v in views {
        assert!(v.windows(2).all(|w| w[1] == w[0] + 1));
    }
}
