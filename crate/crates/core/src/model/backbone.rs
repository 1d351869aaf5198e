//! Residual 2D backbones with optional temporal shift on the residual branch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Activation, BatchNorm2d, Conv2d, MaxPool, Tape};
use super::params::{Gradients, ParamStore};
use super::shift::{temporal_shift, temporal_shift_adjoint, ShiftSpec};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// Bottleneck ResNet with [3, 4, 6, 3] blocks.
    #[serde(rename = "deep-50")]
    Deep50,
    /// Bottleneck ResNet with [3, 4, 23, 3] blocks.
    #[serde(rename = "deep-101")]
    Deep101,
    /// Inverted-residual network (MobileNetV2 layout).
    #[serde(rename = "mobile")]
    Mobile,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Deep50 => "deep-50",
            Preset::Deep101 => "deep-101",
            Preset::Mobile => "mobile",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deep-50" => Ok(Preset::Deep50),
            "deep-101" => Ok(Preset::Deep101),
            "mobile" => Ok(Preset::Mobile),
            other => Err(crate::Error::Config(format!(
                "unknown backbone preset {other:?} (expected deep-50, deep-101 or mobile)"
            ))),
        }
    }
}

/// Execution context shared by every block of one forward pass.
#[derive(Clone, Copy)]
pub(crate) struct Ctx {
    pub train: bool,
    pub segments: usize,
    pub shift: Option<ShiftSpec>,
}

#[derive(Debug, Clone)]
pub(crate) struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm2d,
    act: Option<Activation>,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    fn new(
        store: &mut ParamStore,
        conv_name: &str,
        bn_name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        groups: usize,
        act: Option<Activation>,
        rng: &mut impl Rng,
    ) -> Self {
        ConvBn {
            conv: Conv2d::new(store, conv_name, cin, cout, k, stride, k / 2, groups, rng),
            bn: BatchNorm2d::new(store, bn_name, cout),
            act,
        }
    }

    fn forward(&self, store: &ParamStore, x: Tensor, ctx: Ctx, mut tape: Option<&mut Tape>) -> Tensor {
        let y = self.conv.forward(store, x, tape.as_deref_mut());
        let y = self.bn.forward(store, y, ctx.train, tape.as_deref_mut());
        match self.act {
            Some(a) => a.forward(y, tape),
            None => y,
        }
    }

    fn backward(&self, store: &ParamStore, grads: &mut Gradients, dy: Tensor, tape: &mut Tape, need_dx: bool) -> Option<Tensor> {
        let dy = match self.act {
            Some(a) => a.backward(dy, tape),
            None => dy,
        };
        let dy = self.bn.backward(store, grads, dy, tape);
        self.conv.backward(store, grads, &dy, tape, need_dx)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Bottleneck {
    reduce: ConvBn,
    spatial: ConvBn,
    expand: ConvBn,
    downsample: Option<ConvBn>,
}

#[derive(Debug, Clone)]
pub(crate) struct InvertedResidual {
    expand: Option<ConvBn>,
    depthwise: ConvBn,
    project: ConvBn,
    residual: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum Block {
    Bottleneck(Bottleneck),
    Inverted(InvertedResidual),
}

impl Block {
    fn shifts(&self) -> bool {
        match self {
            Block::Bottleneck(_) => true,
            Block::Inverted(b) => b.residual,
        }
    }

    fn forward(&self, store: &ParamStore, x: Tensor, ctx: Ctx, mut tape: Option<&mut Tape>) -> Result<Tensor> {
        let branch_in = match ctx.shift {
            Some(spec) if self.shifts() => temporal_shift(&x, ctx.segments, spec)?,
            _ => x.clone(),
        };
        match self {
            Block::Bottleneck(b) => {
                let y = b.reduce.forward(store, branch_in, ctx, tape.as_deref_mut());
                let y = b.spatial.forward(store, y, ctx, tape.as_deref_mut());
                let mut y = b.expand.forward(store, y, ctx, tape.as_deref_mut());
                let skip = match &b.downsample {
                    Some(ds) => ds.forward(store, x, ctx, tape.as_deref_mut()),
                    None => x,
                };
                y.add_assign(&skip);
                Ok(Activation::Relu.forward(y, tape))
            }
            Block::Inverted(b) => {
                let mut y = branch_in;
                if let Some(e) = &b.expand {
                    y = e.forward(store, y, ctx, tape.as_deref_mut());
                }
                let y = b.depthwise.forward(store, y, ctx, tape.as_deref_mut());
                let mut y = b.project.forward(store, y, ctx, tape.as_deref_mut());
                if b.residual {
                    y.add_assign(&x);
                }
                Ok(y)
            }
        }
    }

    fn backward(&self, store: &ParamStore, grads: &mut Gradients, dy: Tensor, ctx: Ctx, tape: &mut Tape) -> Result<Tensor> {
        let (d_branch_in, d_skip) = match self {
            Block::Bottleneck(b) => {
                let dy = Activation::Relu.backward(dy, tape);
                let d_skip = match &b.downsample {
                    Some(ds) => ds.backward(store, grads, dy.clone(), tape, true).expect("dx requested"),
                    None => dy.clone(),
                };
                let d = b.expand.backward(store, grads, dy, tape, true).expect("dx requested");
                let d = b.spatial.backward(store, grads, d, tape, true).expect("dx requested");
                let d = b.reduce.backward(store, grads, d, tape, true).expect("dx requested");
                (d, Some(d_skip))
            }
            Block::Inverted(b) => {
                let d_skip = b.residual.then(|| dy.clone());
                let d = b.project.backward(store, grads, dy, tape, true).expect("dx requested");
                let mut d = b.depthwise.backward(store, grads, d, tape, true).expect("dx requested");
                if let Some(e) = &b.expand {
                    d = e.backward(store, grads, d, tape, true).expect("dx requested");
                }
                (d, d_skip)
            }
        };
        let mut dx = match ctx.shift {
            Some(spec) if self.shifts() => temporal_shift_adjoint(&d_branch_in, ctx.segments, spec)?,
            _ => d_branch_in,
        };
        if let Some(s) = d_skip {
            dx.add_assign(&s);
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Backbone {
    stem: ConvBn,
    pool: bool,
    blocks: Vec<Block>,
    tail: Option<ConvBn>,
    pub features: usize,
}

fn scaled(c: usize, div: usize) -> usize {
    (c / div.max(1)).max(4)
}

impl Backbone {
    pub fn new(store: &mut ParamStore, preset: Preset, width_div: usize, in_channels: usize, rng: &mut impl Rng) -> Self {
        match preset {
            Preset::Deep50 => Self::resnet(store, &[3, 4, 6, 3], width_div, in_channels, rng),
            Preset::Deep101 => Self::resnet(store, &[3, 4, 23, 3], width_div, in_channels, rng),
            Preset::Mobile => Self::mobile(store, width_div, in_channels, rng),
        }
    }

    fn resnet(store: &mut ParamStore, layers: &[usize], div: usize, in_channels: usize, rng: &mut impl Rng) -> Self {
        const EXPANSION: usize = 4;
        let base = scaled(64, div);
        let stem = ConvBn::new(store, "conv1", "bn1", in_channels, base, 7, 2, 1, Some(Activation::Relu), rng);
        let mut blocks = Vec::new();
        let mut cin = base;
        for (stage, &count) in layers.iter().enumerate() {
            let mid = scaled(64 << stage, div);
            let out = mid * EXPANSION;
            for j in 0..count {
                let stride = if j == 0 && stage > 0 { 2 } else { 1 };
                let p = format!("layer{}.{}", stage + 1, j);
                let reduce = ConvBn::new(store, &format!("{p}.conv1"), &format!("{p}.bn1"), cin, mid, 1, 1, 1, Some(Activation::Relu), rng);
                let spatial = ConvBn::new(store, &format!("{p}.conv2"), &format!("{p}.bn2"), mid, mid, 3, stride, 1, Some(Activation::Relu), rng);
                let expand = ConvBn::new(store, &format!("{p}.conv3"), &format!("{p}.bn3"), mid, out, 1, 1, 1, None, rng);
                // Each block starts as the identity (or its projection).
                store.get_mut(expand.bn.gamma).fill(0.0);
                let downsample = (stride != 1 || cin != out).then(|| {
                    ConvBn::new(store, &format!("{p}.downsample.0"), &format!("{p}.downsample.1"), cin, out, 1, stride, 1, None, rng)
                });
                blocks.push(Block::Bottleneck(Bottleneck {
                    reduce,
                    spatial,
                    expand,
                    downsample,
                }));
                cin = out;
            }
        }
        Backbone {
            stem,
            pool: true,
            blocks,
            tail: None,
            features: cin,
        }
    }

    fn mobile(store: &mut ParamStore, div: usize, in_channels: usize, rng: &mut impl Rng) -> Self {
        // (expand ratio, channels, repeats, first stride)
        const SETTINGS: [(usize, usize, usize, usize); 7] = [
            (1, 16, 1, 1),
            (6, 24, 2, 2),
            (6, 32, 3, 2),
            (6, 64, 4, 2),
            (6, 96, 3, 1),
            (6, 160, 3, 2),
            (6, 320, 1, 1),
        ];
        let relu6 = Some(Activation::Relu6);
        let first = scaled(32, div);
        let stem = ConvBn::new(store, "features.0.0", "features.0.1", in_channels, first, 3, 2, 1, relu6, rng);
        let mut blocks = Vec::new();
        let mut cin = first;
        let mut idx = 1;
        for (t, c, n, s) in SETTINGS {
            let out = scaled(c, div);
            for j in 0..n {
                let stride = if j == 0 { s } else { 1 };
                let hidden = cin * t;
                let p = format!("features.{idx}.conv");
                let expand = (t != 1).then(|| {
                    ConvBn::new(store, &format!("{p}.0.0"), &format!("{p}.0.1"), cin, hidden, 1, 1, 1, relu6, rng)
                });
                let depthwise = ConvBn::new(store, &format!("{p}.1.0"), &format!("{p}.1.1"), hidden, hidden, 3, stride, hidden, relu6, rng);
                let project = ConvBn::new(store, &format!("{p}.2"), &format!("{p}.3"), hidden, out, 1, 1, 1, None, rng);
                blocks.push(Block::Inverted(InvertedResidual {
                    expand,
                    depthwise,
                    project,
                    residual: stride == 1 && cin == out,
                }));
                cin = out;
                idx += 1;
            }
        }
        let last = scaled(1280, div);
        let tail = ConvBn::new(store, &format!("features.{idx}.0"), &format!("features.{idx}.1"), cin, last, 1, 1, 1, relu6, rng);
        Backbone {
            stem,
            pool: false,
            blocks,
            tail: Some(tail),
            features: last,
        }
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    /// `[N, C, H, W]` frames to `[N, F, h, w]` feature maps.
    pub fn forward(&self, store: &ParamStore, x: Tensor, ctx: Ctx, mut tape: Option<&mut Tape>) -> Result<Tensor> {
        let mut y = self.stem.forward(store, x, ctx, tape.as_deref_mut());
        if self.pool {
            y = MaxPool::forward(y, tape.as_deref_mut());
        }
        for b in &self.blocks {
            y = b.forward(store, y, ctx, tape.as_deref_mut())?;
        }
        if let Some(t) = &self.tail {
            y = t.forward(store, y, ctx, tape);
        }
        Ok(y)
    }

    pub fn backward(&self, store: &ParamStore, grads: &mut Gradients, dy: Tensor, ctx: Ctx, tape: &mut Tape) -> Result<()> {
        let mut d = dy;
        if let Some(t) = &self.tail {
            d = t.backward(store, grads, d, tape, true).expect("dx requested");
        }
        for b in self.blocks.iter().rev() {
            d = b.backward(store, grads, d, ctx, tape)?;
        }
        if self.pool {
            d = MaxPool::backward(&d, tape);
        }
        self.stem.backward(store, grads, d, tape, false);
        Ok(())
    }
}
