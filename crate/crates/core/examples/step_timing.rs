//! Times one training step (forward + backward) for a batch of 6 clips.
//!
//! `cargo run --release --example step_timing -- <width_div> <input_side> [preset]`

use std::time::Instant;

use mmtsm::model::{ModelConfig, Preset, Tape, TsmModel};
use mmtsm::tensor::Tensor;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: step_timing <width_div> <input_side> [deep-50|deep-101|mobile]");
        std::process::exit(1);
    }
    let div: usize = args[1].parse().expect("width_div");
    let hw: usize = args[2].parse().expect("input side");
    let preset: Preset = args.get(3).map_or(Preset::Deep50, |s| s.parse().expect("preset"));
    let cfg = ModelConfig {
        preset,
        width_div: div,
        segments: 8,
        shift: true,
        fold_div: 8,
        num_classes: 3,
        in_channels: 3,
    };
    let model = TsmModel::new(cfg, 0).expect("valid config");
    let clips = 6;
    let n = clips * 3 * 8;
    let x = Tensor::from_vec(&[n, 3, hw, hw], (0..n * 3 * hw * hw).map(|i| (i % 97) as f32 / 97.0).collect())
        .expect("shape");
    let count: usize = model.params().params().iter().map(|p| p.data.len()).sum();
    for _ in 0..3 {
        let t = Instant::now();
        let mut tape = Tape::new();
        let y = model.forward(x.clone(), clips, true, Some(&mut tape)).expect("forward");
        let fwd = t.elapsed();
        model.backward(&y, &mut tape).expect("backward");
        println!("width_div {div}, input {hw}, {count} params: forward {fwd:?}, step {:?}", t.elapsed());
    }
}
