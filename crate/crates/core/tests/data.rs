mod common;

use std::fs;
use std::path::Path;

use common::synthetic;
use mmtsm::data::{gen_synthetic, load_index, read_clip, ChannelPolicy, ClipSplit, RawClip, SynthParams};

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generated_dataset_reads_back_as_the_in_memory_clips() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = SynthParams::new(4, 3, 8, 32, 3);
    p.test_clips = 2;
    let root = gen_synthetic(&p, dir.path()).unwrap();
    let (train, test) = synthetic(&p);
    for (split, want) in [(ClipSplit::Train, &train), (ClipSplit::Test, &test)] {
        let index = load_index(&root, split).unwrap();
        assert_eq!(index.num_classes(), 3);
        assert_eq!(index.len(), want.len());
        for (clip, mem) in index.clips.iter().zip(want) {
            let disk = read_clip(clip, ChannelPolicy::One).unwrap();
            assert_eq!(disk.label, mem.label);
            for (a, b) in disk.modalities.iter().zip(&mem.modalities) {
                assert_eq!(a, b, "{}", clip.id);
            }
        }
    }
}

#[test]
fn three_channel_policy_replicates_single_channel_frames() {
    let dir = tempfile::tempdir().unwrap();
    let p = SynthParams::new(2, 2, 8, 32, 4);
    let root = gen_synthetic(&p, dir.path()).unwrap();
    let index = load_index(&root, ClipSplit::Train).unwrap();
    let one = read_clip(&index.clips[0], ChannelPolicy::One).unwrap();
    let three = read_clip(&index.clips[0], ChannelPolicy::Three).unwrap();
    let (a, b) = (&one.modalities[1][0], &three.modalities[1][0]);
    assert_eq!(b.channels, 3);
    for (i, v) in a.data.iter().enumerate() {
        assert!(b.data[i * 3..i * 3 + 3].iter().all(|x| x == v));
    }
}

#[test]
fn generation_is_byte_reproducible() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut p = SynthParams::new(3, 3, 8, 32, 9);
    p.test_clips = 3;
    p.depth_noise_only = true;
    gen_synthetic(&p, d1.path()).unwrap();
    gen_synthetic(&p, d2.path()).unwrap();
    assert_eq!(tree_bytes(d1.path()), tree_bytes(d2.path()));
}

/// Per-clip average over frames of a 4x4 mean-pooled image per modality.
fn frame_mean_features(clip: &RawClip) -> Vec<f64> {
    let mut feat = Vec::new();
    for frames in &clip.modalities {
        let f0 = &frames[0];
        let cell = f0.width / 4;
        let mut acc = vec![0.0f64; 16 * f0.channels];
        for f in frames {
            for y in 0..f.height {
                for x in 0..f.width {
                    for c in 0..f.channels {
                        acc[((y / cell) * 4 + x / cell) * f.channels + c] += f.get(x, y, c) as f64;
                    }
                }
            }
        }
        let n = (frames.len() * cell * cell) as f64;
        feat.extend(acc.into_iter().map(|v| v / n));
    }
    feat
}

/// Nearest-centroid accuracy on frame-mean features.
fn frame_mean_accuracy(train: &[RawClip], test: &[RawClip], classes: usize) -> f64 {
    let dim = frame_mean_features(&train[0]).len();
    let mut centroids = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for c in train {
        for (a, v) in centroids[c.label].iter_mut().zip(frame_mean_features(c)) {
            *a += v;
        }
        counts[c.label] += 1;
    }
    for (row, n) in centroids.iter_mut().zip(&counts) {
        row.iter_mut().for_each(|v| *v /= *n as f64);
    }
    let hits = test
        .iter()
        .filter(|c| {
            let f = frame_mean_features(c);
            let dist = |k: usize| centroids[k].iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            (0..classes).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap() == c.label
        })
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn classes_are_not_separable_from_frame_means() {
    for classes in [3, 4, 8] {
        let mut p = SynthParams::new(16 * classes, classes, 16, 64, 21);
        p.test_clips = 16 * classes;
        let (train, test) = synthetic(&p);
        let acc = frame_mean_accuracy(&train, &test, classes);
        let chance = 1.0 / classes as f64;
        assert!((acc - chance).abs() <= 0.15, "K={classes}: accuracy {acc:.3} vs chance {chance:.3}");
    }
}
