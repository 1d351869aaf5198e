//! Temporal shift: move a fraction of channels one step along time.
//!
//! For features laid out `[B*S, C, H, W]` (S segments per clip), with
//! `fold = C / fold_div`:
//!
//! * channels `[0, fold)` read from the next segment (`out[t] = in[t+1]`),
//! * channels `[fold, 2*fold)` read from the previous segment (`out[t] = in[t-1]`),
//! * the rest pass through untouched.
//!
//! Out-of-range neighbours are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSpec {
    /// `C / fold_div` channels move each way.
    pub fold_div: usize,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec { fold_div: 8 }
    }
}

impl ShiftSpec {
    pub fn fold(&self, channels: usize) -> usize {
        channels / self.fold_div
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.fold_div == 0 {
            return Err(Error::Config("fold_div must be positive".into()));
        }
        if 2 * self.fold(channels) > channels {
            return Err(Error::Shape(format!(
                "shifting 2 x {} channels exceeds {} channels (fold_div {})",
                self.fold(channels),
                channels,
                self.fold_div
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Adjoint,
}

/// Shifts `x` (`[B*S, C, H, W]`) along the segment axis.
pub fn temporal_shift(x: &Tensor, segments: usize, spec: ShiftSpec) -> Result<Tensor> {
    shift_impl(x, segments, spec, Direction::Forward)
}

/// The adjoint of [`temporal_shift`]: the same shift with the two folds'
/// directions exchanged. This is the input gradient of the shift.
pub fn temporal_shift_adjoint(g: &Tensor, segments: usize, spec: ShiftSpec) -> Result<Tensor> {
    shift_impl(g, segments, spec, Direction::Adjoint)
}

fn shift_impl(x: &Tensor, segments: usize, spec: ShiftSpec, dir: Direction) -> Result<Tensor> {
    if x.shape().len() != 4 {
        return Err(Error::Shape(format!("temporal shift expects 4-d input, got {:?}", x.shape())));
    }
    let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    if segments == 0 || n % segments != 0 {
        return Err(Error::Shape(format!(
            "leading dimension {n} is not divisible by {segments} segments"
        )));
    }
    spec.validate(c)?;
    let fold = spec.fold(c);
    let plane = h * w;
    let frame = c * plane;
    let mut out = x.clone();
    if fold == 0 {
        return Ok(out);
    }
    // (channel range, segment offset to read from)
    let (first, second): (isize, isize) = match dir {
        Direction::Forward => (1, -1),
        Direction::Adjoint => (-1, 1),
    };
    let src = x.data();
    let dst = out.data_mut();
    for clip in 0..n / segments {
        for t in 0..segments {
            let base = (clip * segments + t) * frame;
            for (range, offset) in [(0..fold, first), (fold..2 * fold, second)] {
                let from = t as isize + offset;
                let span = range.start * plane..range.end * plane;
                let d = &mut dst[base + span.start..base + span.end];
                if from < 0 || from >= segments as isize {
                    d.fill(0.0);
                } else {
                    let sbase = (clip * segments + from as usize) * frame;
                    d.copy_from_slice(&src[sbase + span.start..sbase + span.end]);
                }
            }
        }
    }
    Ok(out)
}
