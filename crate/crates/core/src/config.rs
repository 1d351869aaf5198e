//! Experiment configuration: one TOML file, dotted-path overrides and a
//! stable digest used to name run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::ChannelPolicy;
use crate::error::{Error, Result};
use crate::model::{short_digest, FusionWeights, ModelConfig, Preset};
use crate::sampling::{SampleMode, SamplerConfig};
use crate::scoring::EvalConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory holding `index.json`.
    pub root: PathBuf,
    /// Decoded channel count of TIR and DEPTH frames: 1 or 3.
    pub channels: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            root: PathBuf::from("data"),
            channels: 3,
        }
    }
}

impl DatasetSection {
    pub fn channel_policy(&self) -> Result<ChannelPolicy> {
        ChannelPolicy::from_count(self.channels)
            .ok_or_else(|| Error::Config(format!("dataset.channels must be 1 or 3, got {}", self.channels)))
    }
}

/// Evaluation-time temporal sampling. Training always draws one random
/// frame per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// `center` or `dense`.
    pub mode: SampleMode,
    pub passes: usize,
    pub dense_windows: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            mode: SampleMode::Center,
            passes: 1,
            dense_windows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    /// Divides every channel width; 1 is the full network.
    pub width_div: usize,
    pub segments: usize,
    pub shift: bool,
    /// One `1/fold_div` of the channels moves each way.
    pub fold_div: usize,
    /// Backbone checkpoint to start from; empty means random init.
    pub pretrained: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            preset: m.preset,
            width_div: m.width_div,
            segments: m.segments,
            shift: m.shift,
            fold_div: m.fold_div,
            pretrained: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tta_flip: bool,
    /// Network input side at test time; 0 keeps `augment.input_size`.
    pub input_size: usize,
    /// Short-side resize target at test time; 0 keeps `augment.scale_size`.
    pub scale_size: usize,
    /// Average the best `swa_top` checkpoints before evaluating; 0 disables.
    pub swa_top: usize,
    pub batch_size: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            tta_flip: false,
            input_size: 0,
            scale_size: 0,
            swa_top: 0,
            batch_size: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub sampler: SamplerSection,
    pub augment: AugmentConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    /// Small settings that train on the synthetic dataset in about a minute
    /// on one CPU core.
    pub fn desk() -> Self {
        let mut c = ExperimentConfig::default();
        c.model.width_div = 16;
        c.augment.input_size = 56;
        c.augment.scale_size = 64;
        c.augment.scales = vec![1.0];
        c.train.epochs = 15;
        c.train.lr = 0.1;
        c.train.lr_milestones = vec![11, 14];
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.channel_policy()?;
        if self.sampler.passes == 0 || self.sampler.dense_windows == 0 {
            return Err(Error::Config("sampler.passes and sampler.dense_windows must be positive".into()));
        }
        if self.sampler.mode == SampleMode::Random {
            return Err(Error::Config("sampler.mode must be center or dense".into()));
        }
        if self.eval.batch_size == 0 {
            return Err(Error::Config("eval.batch_size must be positive".into()));
        }
        self.augment.validate()?;
        self.eval_augment().validate()?;
        self.train.validate()?;
        self.model_config(2)?.validate()
    }

    /// Applies `path=value` edits, e.g. `train.epochs=2` or
    /// `augment.scales=[1.0, 0.875]`. Values are parsed as TOML and fall back
    /// to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut root = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not of the form key=value")))?;
            set_path(&mut root, path.trim(), parse_value(raw.trim()))?;
        }
        let cfg: ExperimentConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self, num_classes: usize) -> Result<ModelConfig> {
        Ok(ModelConfig {
            preset: self.model.preset,
            width_div: self.model.width_div,
            segments: self.model.segments,
            shift: self.model.shift,
            fold_div: self.model.fold_div,
            num_classes,
            in_channels: self.dataset.channel_policy()?.channels(crate::data::ModalityKind::Tir),
        })
    }

    /// Augmentation settings with the evaluation size overrides applied.
    pub fn eval_augment(&self) -> AugmentConfig {
        let mut a = self.augment.clone();
        if self.eval.input_size > 0 {
            a.input_size = self.eval.input_size;
            a.scale_size = a.scale_size.max(a.input_size);
        }
        if self.eval.scale_size > 0 {
            a.scale_size = self.eval.scale_size;
        }
        a
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            sampler: SamplerConfig {
                segments: self.model.segments,
                mode: self.sampler.mode,
                passes: self.sampler.passes,
                dense_windows: self.sampler.dense_windows,
            },
            tta_flip: self.eval.tta_flip,
            augment: self.eval_augment(),
            fusion: self.train.fusion,
            batch_size: self.eval.batch_size,
        }
    }

    pub fn fusion(&self) -> FusionWeights {
        self.train.fusion
    }

    /// Digest of the canonical JSON form. Formatting and key order in the
    /// source file do not matter; the evaluation batch size (a speed knob)
    /// is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.eval.batch_size = 0;
        let canonical = serde_json::to_string(&serde_json::to_value(&c).expect("config serializes"))
            .expect("value serializes");
        short_digest(canonical.as_bytes())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let mut table = root;
    for (i, key) in keys.iter().enumerate() {
        let here = keys[..i].join(".");
        if !table.contains_key(*key) {
            let mut valid: Vec<&str> = table.keys().map(String::as_str).collect();
            valid.sort_unstable();
            let scope = if here.is_empty() { "top level".to_string() } else { format!("[{here}]") };
            return Err(Error::Config(format!(
                "unknown config key {path:?}: {key:?} is not in {scope}; valid keys: {}",
                valid.join(", ")
            )));
        }
        if i + 1 == keys.len() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        table = match table.get_mut(*key) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config(format!("config key {:?} is not a section", keys[..=i].join(".")))),
        };
    }
    unreachable!("split yields at least one key")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::desk();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn overrides_edit_nested_fields() {
        let c = ExperimentConfig::default()
            .with_overrides(&["train.epochs=2", "augment.scales=[1.0, 0.5]", "model.preset=mobile", "seed = 9"])
            .unwrap();
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.augment.scales, vec![1.0, 0.5]);
        assert_eq!(c.model.preset, Preset::Mobile);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_key_lists_siblings() {
        let err = ExperimentConfig::default().with_overrides(&["train.epoch=2"]).unwrap_err().to_string();
        assert!(err.contains("\"epoch\""), "{err}");
        assert!(err.contains("epochs") && err.contains("batch_size"), "{err}");
        let err = ExperimentConfig::default().with_overrides(&["trian.epochs=2"]).unwrap_err().to_string();
        assert!(err.contains("top level") && err.contains("train"), "{err}");
    }

    #[test]
    fn unknown_key_in_file_is_rejected() {
        assert!(ExperimentConfig::from_toml("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::from_toml("seed = 1\n[train]\nepochs = 3\n").unwrap();
        let b = ExperimentConfig::from_toml("[train]\n  epochs=3\n\n# comment\n[eval]\nbatch_size = 2\n").unwrap();
        let b = b.with_overrides(&["seed=1"]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = a.with_overrides(&["train.lr=0.02"]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn eval_size_override_widens_scale_target() {
        let c = ExperimentConfig::desk().with_overrides(&["eval.input_size=64"]).unwrap();
        let a = c.eval_augment();
        assert_eq!((a.input_size, a.scale_size), (64, 64));
        let c = ExperimentConfig::default().with_overrides(&["eval.input_size=256"]).unwrap();
        assert_eq!(c.eval_augment().scale_size, 256);
    }

    #[test]
    fn rejects_bad_values() {
        let base = ExperimentConfig::default();
        assert!(base.with_overrides(&["dataset.channels=2"]).is_err());
        assert!(base.with_overrides(&["train.epochs=0"]).is_err());
        assert!(base.with_overrides(&["sampler.mode=random"]).is_err());
        assert!(base.with_overrides(&["train.epochs"]).is_err());
    }
}
