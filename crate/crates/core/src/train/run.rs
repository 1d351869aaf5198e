use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::fused_cross_entropy;
use super::optim::{grad_clip, LrSchedule, Sgd};
use crate::augment::AugmentConfig;
use crate::data::RawClip;
use crate::error::{Error, Result};
use crate::model::{build_input, fuse_logits, save_checkpoint, FusionWeights, Tape, TsmModel};
use crate::pipeline::{derive_seed, train_view};
use crate::scoring::{argmax, evaluate, CheckpointEntry, CheckpointSet, EvalConfig, Member};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    /// Epochs (0-based) at which the rate is multiplied by `lr_factor`;
    /// empty means one third and five sixths of `epochs`.
    pub lr_milestones: Vec<usize>,
    pub lr_factor: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub clip_norm: f32,
    pub fusion: FusionWeights,
    /// Fraction of training clips held out (per class) for validation.
    pub val_fraction: f64,
    /// Weight of the current batch in the running normalization statistics.
    pub bn_momentum: f32,
    pub checkpoint_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 6,
            lr: 0.01,
            lr_milestones: Vec::new(),
            lr_factor: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            clip_norm: 20.0,
            fusion: FusionWeights::default(),
            val_fraction: 0.1,
            bn_momentum: 0.1,
            checkpoint_every_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.lr,
            milestones: if self.lr_milestones.is_empty() {
                LrSchedule::default_milestones(self.epochs)
            } else {
                self.lr_milestones.clone()
            },
            factor: self.lr_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("train.epochs and train.batch_size must be positive".into()));
        }
        if !(self.clip_norm > 0.0) || !(self.momentum >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "train.clip_norm must be positive; momentum and weight_decay non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("train.val_fraction must lie in [0, 1)".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(Error::Config("train.bn_momentum must lie in (0, 1]".into()));
        }
        self.fusion.validate()?;
        self.schedule().validate()
    }
}

/// One completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f32,
    pub train_loss: f64,
    /// Running accuracy of the fused training-mode predictions.
    pub train_top1: f64,
    pub val_top1: Option<f64>,
    pub val_top5: Option<f64>,
    pub val_loss: Option<f64>,
    /// Mean global gradient norm before clipping.
    pub grad_norm: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::from("| epoch | lr | loss | train top1 | val top1 | val top5 |\n|---|---|---|---|---|---|\n");
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "| {} | {:.6} | {:.4} | {:.4} | {} | {} |",
                r.epoch,
                r.lr,
                r.train_loss,
                r.train_top1,
                opt(r.val_top1),
                opt(r.val_top5)
            );
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

pub struct TrainOutcome {
    pub report: TrainReport,
    /// Empty when no output directory was given.
    pub checkpoints: CheckpointSet,
}

/// Trains `model` in place. With `out_dir`, writes `ckpt/epoch_<n>.bin`
/// every epoch plus `scores.json` and `report.jsonl`. Validation uses
/// centre sampling with one pass and no flip.
pub fn train(
    model: &mut TsmModel,
    train_clips: &[RawClip],
    val_clips: &[RawClip],
    aug: &AugmentConfig,
    cfg: &TrainConfig,
    seed: u64,
    out_dir: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    aug.validate()?;
    if train_clips.is_empty() {
        return Err(Error::EmptyDataset("no training clips".into()));
    }
    let k = model.num_classes();
    if let Some(c) = train_clips.iter().chain(val_clips).find(|c| c.label >= k) {
        return Err(Error::LabelOutOfRange {
            clip: c.id.clone(),
            label: c.label,
            classes: k,
        });
    }
    let segments = model.config().segments;
    let schedule = cfg.schedule();
    let mut sgd = Sgd::new(model.params(), cfg.momentum, cfg.weight_decay);
    let eval_cfg = EvalConfig::base(segments, aug.clone(), cfg.fusion);
    let mut report = TrainReport::default();
    let mut set = CheckpointSet::new(model.config().hash(), out_dir.unwrap_or(Path::new(".")));
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("ckpt")).map_err(|e| Error::io(dir, e))?;
    }

    let mut order: Vec<usize> = (0..train_clips.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = schedule.lr_at(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch as u64, u64::MAX));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut norm_sum, mut steps) = (0.0f64, 0usize, 0.0f64, 0usize);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let stacks = batch
                .iter()
                .map(|&i| train_view(&train_clips[i], segments, aug, derive_seed(seed, epoch as u64, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<usize> = batch.iter().map(|&i| train_clips[i].label).collect();
            let x = build_input(&stacks, model.config().in_channels)?;
            let mut tape = Tape::new();
            let logits = model.forward(x, batch.len(), true, Some(&mut tape))?;
            let (loss, dlogits) = fused_cross_entropy(&logits, &labels, &cfg.fusion)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: epoch + 1, step, loss });
            }
            let fused = fuse_logits(&logits, &cfg.fusion);
            correct += labels
                .iter()
                .enumerate()
                .filter(|(r, &y)| argmax(&fused.data()[r * k..(r + 1) * k]) == y)
                .count();
            let mut grads = model.backward(&dlogits, &mut tape)?;
            norm_sum += grad_clip(&mut grads, cfg.clip_norm) as f64;
            sgd.step(model.params_mut(), &grads, lr);
            model.commit_bn_stats(&tape, cfg.bn_momentum);
            loss_sum += loss * batch.len() as f64;
            steps += 1;
        }
        let (val_top1, val_top5, val_loss) = if val_clips.is_empty() {
            (None, None, None)
        } else {
            let r = evaluate(&[Member { model, weight: 1.0 }], val_clips, &eval_cfg)?;
            (Some(r.top1), Some(r.top5), r.nll)
        };
        let n = train_clips.len() as f64;
        let mut record = EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / n,
            train_top1: correct as f64 / n,
            val_top1,
            val_top5,
            val_loss,
            grad_norm: norm_sum / steps as f64,
            checkpoint: None,
        };
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every_epoch || epoch + 1 == cfg.epochs {
                let rel = PathBuf::from("ckpt").join(format!("epoch_{}.bin", epoch + 1));
                let score = val_top1.unwrap_or(record.train_top1);
                save_checkpoint(model, &dir.join(&rel), epoch + 1, score)?;
                set.entries.push(CheckpointEntry {
                    path: rel.clone(),
                    epoch: epoch + 1,
                    score,
                    loss: val_loss,
                });
                set.save()?;
                record.checkpoint = Some(rel);
            }
        }
        on_epoch(&record);
        report.epochs.push(record);
        if let Some(dir) = out_dir {
            let path = dir.join("report.jsonl");
            fs::write(&path, report.to_jsonl()).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(TrainOutcome {
        report,
        checkpoints: set,
    })
}
