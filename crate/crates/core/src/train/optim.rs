//! Momentum SGD, global-norm gradient clipping and step learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ParamKind, ParamStore};

/// Scales every gradient by `max_norm / norm` when the global L2 norm
/// exceeds `max_norm`. Returns the norm before clipping.
pub fn grad_clip(grads: &mut Gradients, max_norm: f32) -> f32 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
/// `d = g + wd * p`, `buf = momentum * buf + d`, `p -= lr * buf`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f32,
    pub weight_decay: f32,
    buffers: Vec<Vec<f32>>,
}

impl Sgd {
    pub fn new(store: &ParamStore, momentum: f32, weight_decay: f32) -> Self {
        Sgd {
            momentum,
            weight_decay,
            buffers: store.params().iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f32) {
        for ((param, grad), buf) in store.params_mut().iter_mut().zip(&grads.grads).zip(&mut self.buffers) {
            if param.kind != ParamKind::Trainable {
                continue;
            }
            for ((p, g), b) in param.data.iter_mut().zip(grad).zip(buf.iter_mut()) {
                let d = g + self.weight_decay * *p;
                *b = self.momentum * *b + d;
                *p -= lr * *b;
            }
        }
    }
}

/// Multiplies the base rate by `factor` at each milestone epoch (0-based:
/// epoch `m` and later use the decayed rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f32,
    pub milestones: Vec<usize>,
    pub factor: f32,
}

impl LrSchedule {
    /// Milestones at one third and five sixths of training (10 and 25 of 30).
    pub fn default_milestones(epochs: usize) -> Vec<usize> {
        let third = ((epochs as f64) / 3.0).round() as usize;
        let five_sixths = ((epochs as f64) * 5.0 / 6.0).round() as usize;
        let mut m = vec![third, five_sixths];
        m.retain(|&e| e > 0 && e < epochs);
        m.dedup();
        m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.factor > 0.0) {
            return Err(Error::Config("learning rate and decay factor must be positive".into()));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("learning-rate milestones must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f32 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.base * self.factor.powi(passed as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_phases() {
        let s = LrSchedule {
            base: 0.01,
            milestones: vec![10, 20],
            factor: 0.1,
        };
        assert_eq!(s.lr_at(0), 0.01);
        assert_eq!(s.lr_at(9), 0.01);
        assert!((s.lr_at(10) - 0.001).abs() < 1e-9);
        assert!((s.lr_at(25) - 0.0001).abs() < 1e-10);
        assert_eq!(LrSchedule::default_milestones(30), vec![10, 25]);
        assert_eq!(LrSchedule::default_milestones(15), vec![5, 13]);
    }

    #[test]
    fn clip_halves_and_passes() {
        let mut store = ParamStore::new();
        store.add("a", &[2], ParamKind::Trainable, vec![0.0; 2]);
        let mut g = Gradients::zeros_like(&store);
        g.grads[0] = vec![24.0, 32.0];
        assert_eq!(grad_clip(&mut g, 20.0), 40.0);
        assert_eq!(g.grads[0], vec![12.0, 16.0]);
        g.grads[0] = vec![3.0, 4.0];
        grad_clip(&mut g, 20.0);
        assert_eq!(g.grads[0], vec![3.0, 4.0]);
    }

    #[test]
    fn plain_step_and_weight_decay() {
        let mut store = ParamStore::new();
        store.add("w", &[2], ParamKind::Trainable, vec![1.0, -2.0]);
        store.add("rm", &[1], ParamKind::Buffer, vec![5.0]);
        let mut g = Gradients::zeros_like(&store);
        g.grads[0] = vec![0.5, 0.25];
        g.grads[1] = vec![100.0];
        let mut sgd = Sgd::new(&store, 0.0, 0.0);
        sgd.step(&mut store, &g, 0.1);
        assert_eq!(store.params()[0].data, vec![1.0 - 0.05, -2.0 - 0.025]);
        assert_eq!(store.params()[1].data, vec![5.0]);

        let mut store2 = ParamStore::new();
        store2.add("w", &[1], ParamKind::Trainable, vec![2.0]);
        let mut g2 = Gradients::zeros_like(&store2);
        g2.grads[0] = vec![1.0];
        let mut sgd = Sgd::new(&store2, 0.9, 0.5);
        sgd.step(&mut store2, &g2, 0.1);
        // d = 1 + 0.5 * 2 = 2; buf = 2; p = 2 - 0.2
        assert!((store2.params()[0].data[0] - 1.8).abs() < 1e-6);
        sgd.step(&mut store2, &g2, 0.1);
        // d = 1 + 0.9 = 1.9; buf = 0.9 * 2 + 1.9 = 3.7; p = 1.8 - 0.37
        assert!((store2.params()[0].data[0] - 1.43).abs() < 1e-6);
    }
}
