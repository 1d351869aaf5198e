//! Re-evaluation across one configuration axis.

use std::fmt::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::evaluate;
use super::predict::{EvalConfig, Member};
use crate::data::RawClip;
use crate::error::{Error, Result};
use crate::model::TsmModel;
use crate::plot::{line_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// DEPTH fusion coefficient.
    Alpha,
    /// Segments sampled at evaluation.
    Segments,
    /// Network input side (the scale target grows with it when needed).
    InputSize,
    /// Training epoch whose checkpoint is evaluated.
    Epochs,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Segments => "segments",
            SweepAxis::InputSize => "input_size",
            SweepAxis::Epochs => "epochs",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "segments" => Ok(SweepAxis::Segments),
            "input_size" | "input-size" | "size" => Ok(SweepAxis::InputSize),
            "epochs" => Ok(SweepAxis::Epochs),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected alpha, segments, input_size or epochs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub top1: f64,
    pub top5: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} | top1 | top5 | seconds |\n|---|---|---|---|\n", self.axis.name());
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.2} |", r.value, r.top1, r.top5, r.seconds);
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let pts = |f: fn(&SweepRow) -> f64| self.rows.iter().map(|r| (r.value, f(r))).collect();
        line_plot(
            &format!("Accuracy vs {}", self.axis.name()),
            self.axis.name(),
            "accuracy",
            &[
                Series {
                    name: "top-1",
                    points: pts(|r| r.top1),
                },
                Series {
                    name: "top-5",
                    points: pts(|r| r.top5),
                },
            ],
            Some((0.0, 1.0)),
        )
    }
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{} values must be positive integers, got {v}", axis.name())))
    }
}

/// Evaluates `members` on `clips` once per axis value. The epochs axis
/// replaces the members with the single model `load_epoch` returns.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    members: &[Member<'_>],
    clips: &[RawClip],
    base: &EvalConfig,
    load_epoch: Option<&dyn Fn(usize) -> Result<TsmModel>>,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let start = Instant::now();
        let mut cfg = base.clone();
        let result = match axis {
            SweepAxis::Alpha => {
                cfg.fusion.depth = v as f32;
                cfg.fusion.validate()?;
                evaluate(members, clips, &cfg)?
            }
            SweepAxis::Segments => {
                cfg.sampler.segments = as_count(axis, v)?;
                evaluate(members, clips, &cfg)?
            }
            SweepAxis::InputSize => {
                let size = as_count(axis, v)?;
                cfg.augment.input_size = size;
                cfg.augment.scale_size = cfg.augment.scale_size.max(size);
                evaluate(members, clips, &cfg)?
            }
            SweepAxis::Epochs => {
                let load = load_epoch.ok_or_else(|| Error::Config("the epochs axis needs a training run".into()))?;
                let model = load(as_count(axis, v)?)?;
                evaluate(&[Member { model: &model, weight: 1.0 }], clips, &cfg)?
            }
        };
        rows.push(SweepRow {
            value: v,
            top1: result.top1,
            top5: result.top5,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SweepTable { axis, rows })
}
