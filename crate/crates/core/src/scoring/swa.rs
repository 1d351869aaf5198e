//! Checkpoint sets and weight averaging.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::RawClip;
use crate::error::{Error, Result};
use crate::model::{build_input, read_checkpoint, Tape, TsmModel};
use crate::pipeline::{derive_seed, train_view};

pub const SCORES_FILE: &str = "scores.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    /// Relative paths are resolved against the set's directory.
    pub path: PathBuf,
    pub epoch: usize,
    pub score: f64,
    /// Validation loss, used to break score ties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

/// Scored checkpoints of one model config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSet {
    pub config_hash: String,
    pub entries: Vec<CheckpointEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CheckpointSet {
    pub fn new(config_hash: impl Into<String>, base_dir: impl Into<PathBuf>) -> Self {
        CheckpointSet {
            config_hash: config_hash.into(),
            entries: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    /// Reads `scores.json` from a run directory.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(SCORES_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut set: CheckpointSet = serde_json::from_str(&text)?;
        set.base_dir = run_dir.to_path_buf();
        Ok(set)
    }

    pub fn save(&self) -> Result<()> {
        let path = self.base_dir.join(SCORES_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn resolve(&self, entry: &CheckpointEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// The `k` best entries: highest score, then lowest loss (entries
    /// without one last), then the later epoch.
    pub fn top(&self, k: usize) -> Vec<CheckpointEntry> {
        let mut sorted = self.entries.clone();
        let loss = |e: &CheckpointEntry| e.loss.unwrap_or(f64::INFINITY);
        sorted.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(loss(a).total_cmp(&loss(b)))
                .then(b.epoch.cmp(&a.epoch))
        });
        sorted.truncate(k);
        sorted
    }
}

/// Averages the parameters (running statistics included) of the `top_k`
/// best checkpoints. Statistics should then be refreshed with
/// [`recompute_bn_stats`].
pub fn swa_average(set: &CheckpointSet, top_k: usize) -> Result<(TsmModel, Vec<CheckpointEntry>)> {
    if top_k == 0 {
        return Err(Error::Config("swa needs top_k >= 1".into()));
    }
    if top_k > set.entries.len() {
        return Err(Error::Config(format!(
            "swa asked for the top {top_k} of only {} checkpoints",
            set.entries.len()
        )));
    }
    let selected = set.top(top_k);
    let mut sums: Option<Vec<Vec<f64>>> = None;
    let mut model: Option<TsmModel> = None;
    for entry in &selected {
        let path = set.resolve(entry);
        let raw = read_checkpoint(&path)?;
        let found = raw.header.config_hash.clone().unwrap_or_default();
        if found != set.config_hash {
            return Err(Error::ConfigHashMismatch {
                expected: set.config_hash.clone(),
                found,
            });
        }
        if model.is_none() {
            let mut m = TsmModel::new(raw.config(&path)?.clone(), 0)?;
            raw.copy_into(m.params_mut(), &path)?;
            model = Some(m);
        }
        let acc = sums.get_or_insert_with(|| raw.params.iter().map(|p| vec![0.0; p.data.len()]).collect());
        for (a, p) in acc.iter_mut().zip(&raw.params) {
            for (s, v) in a.iter_mut().zip(&p.data) {
                *s += *v as f64;
            }
        }
    }
    let mut model = model.expect("at least one checkpoint selected");
    let n = selected.len() as f64;
    for (p, s) in model.params_mut().params_mut().iter_mut().zip(sums.expect("sums")) {
        for (v, a) in p.data.iter_mut().zip(s) {
            *v = (a / n) as f32;
        }
    }
    Ok((model, selected))
}

/// Replaces the running statistics with the average batch statistics of one
/// pass over `clips` under training augmentation.
pub fn recompute_bn_stats(
    model: &mut TsmModel,
    clips: &[RawClip],
    aug: &AugmentConfig,
    batch_size: usize,
    seed: u64,
) -> Result<()> {
    if clips.is_empty() {
        return Err(Error::EmptyDataset("no clips to recompute statistics".into()));
    }
    let segments = model.config().segments;
    for (b, chunk) in clips.chunks(batch_size.max(1)).enumerate() {
        let stacks = chunk
            .iter()
            .enumerate()
            .map(|(i, c)| train_view(c, segments, aug, derive_seed(seed, b as u64, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let x = build_input(&stacks, model.config().in_channels)?;
        let mut tape = Tape::stats_only();
        model.forward(x, stacks.len(), true, Some(&mut tape))?;
        model.accumulate_bn_stats(&tape, b + 1);
    }
    Ok(())
}
