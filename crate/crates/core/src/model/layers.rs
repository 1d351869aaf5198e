//! Layers with explicit backward passes.
//!
//! Forward calls push whatever their backward needs onto a [`Tape`]; backward
//! calls pop in reverse order. All activations are `[N, C, H, W]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::params::{Gradients, ParamId, ParamKind, ParamStore};
use crate::tensor::Tensor;

pub(crate) enum Saved {
    Tensor(Tensor),
    Mask(Vec<bool>),
    Argmax(Vec<u32>),
    Bn { x_hat: Vec<f32>, inv_std: Vec<f32>, train: bool },
    Dims(Vec<usize>),
}

/// Batch statistics observed by one normalization layer during a forward pass.
#[derive(Debug, Clone)]
pub struct BnObservation {
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub mean: Vec<f32>,
    /// Unbiased variance.
    pub var: Vec<f32>,
}

pub struct Tape {
    saved: Vec<Saved>,
    pub(crate) bn: Vec<BnObservation>,
    keep: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape {
            saved: Vec::new(),
            bn: Vec::new(),
            keep: true,
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records batch statistics only; the pass cannot be differentiated.
    pub fn stats_only() -> Self {
        Tape {
            keep: false,
            ..Self::default()
        }
    }

    pub(crate) fn push(&mut self, s: Saved) {
        if self.keep {
            self.saved.push(s);
        }
    }

    pub(crate) fn pop(&mut self) -> Saved {
        self.saved.pop().expect("tape underflow: backward does not mirror forward")
    }

    fn pop_tensor(&mut self) -> Tensor {
        match self.pop() {
            Saved::Tensor(t) => t,
            _ => panic!("tape out of order: expected tensor"),
        }
    }

    pub fn bn_observations(&self) -> &[BnObservation] {
        &self.bn
    }
}

/// Row-major `C = op(A) * op(B) + beta * C` with `op(A)` of shape `m x k`.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    trans_a: bool,
    b: &[f32],
    trans_b: bool,
    c: &mut [f32],
    beta: f32,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths cover every strided access checked above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn kaiming_normal(rng: &mut impl Rng, n: usize, fan: usize) -> Vec<f32> {
    let std = (2.0 / fan as f64).sqrt() as f32;
    let dist = Normal::new(0.0f32, std).expect("positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// 1 (dense) or `in_channels` (depthwise).
    pub groups: usize,
    pub weight: ParamId,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(
            groups == 1 || (groups == in_channels && groups == out_channels),
            "only dense and depthwise convolutions are supported"
        );
        let per_group_in = in_channels / groups;
        let n = out_channels * per_group_in * kernel * kernel;
        let fan_out = out_channels * kernel * kernel / groups;
        let weight = store.add(
            format!("{name}.weight"),
            &[out_channels, per_group_in, kernel, kernel],
            ParamKind::Trainable,
            kaiming_normal(rng, n, fan_out.max(1)),
        );
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            groups,
            weight,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.padding - self.kernel) / self.stride + 1,
            (w + 2 * self.padding - self.kernel) / self.stride + 1,
        )
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    pub fn forward(&self, store: &ParamStore, x: Tensor, tape: Option<&mut Tape>) -> Tensor {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        assert_eq!(c, self.in_channels, "conv input channels");
        let (ho, wo) = self.out_hw(h, w);
        let mut y = Tensor::zeros(&[n, self.out_channels, ho, wo]);
        let weight = store.get(self.weight);
        if self.groups == 1 {
            let kk = c * self.kernel * self.kernel;
            let p = ho * wo;
            let mut col = vec![0.0f32; if self.is_pointwise() { 0 } else { kk * p }];
            let in_len = c * h * w;
            let out_len = self.out_channels * p;
            for i in 0..n {
                let xi = &x.data()[i * in_len..(i + 1) * in_len];
                let src: &[f32] = if self.is_pointwise() {
                    xi
                } else {
                    self.im2col(xi, h, w, ho, wo, &mut col);
                    &col
                };
                let yi = &mut y.data_mut()[i * out_len..(i + 1) * out_len];
                gemm(self.out_channels, kk, p, weight, false, src, false, yi, 0.0);
            }
        } else {
            self.depthwise_forward(weight, &x, &mut y);
        }
        if let Some(t) = tape {
            t.push(Saved::Tensor(x));
        }
        y
    }

    /// Accumulates the weight gradient; returns the input gradient when `need_dx`.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Gradients,
        dy: &Tensor,
        tape: &mut Tape,
        need_dx: bool,
    ) -> Option<Tensor> {
        let x = tape.pop_tensor();
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (ho, wo) = (dy.dim(2), dy.dim(3));
        let weight = store.get(self.weight);
        if self.groups != 1 {
            return self.depthwise_backward(weight, grads, &x, dy, need_dx);
        }
        let kk = c * self.kernel * self.kernel;
        let p = ho * wo;
        let in_len = c * h * w;
        let out_len = self.out_channels * p;
        let mut dx = if need_dx { Some(Tensor::zeros(x.shape())) } else { None };
        let mut col = vec![0.0f32; if self.is_pointwise() { 0 } else { kk * p }];
        let mut dcol = vec![0.0f32; kk * p];
        let dw = grads.get_mut(self.weight);
        for i in 0..n {
            let xi = &x.data()[i * in_len..(i + 1) * in_len];
            let dyi = &dy.data()[i * out_len..(i + 1) * out_len];
            let src: &[f32] = if self.is_pointwise() {
                xi
            } else {
                self.im2col(xi, h, w, ho, wo, &mut col);
                &col
            };
            gemm(self.out_channels, p, kk, dyi, false, src, true, dw, 1.0);
            if let Some(dx) = dx.as_mut() {
                let dxi = &mut dx.data_mut()[i * in_len..(i + 1) * in_len];
                if self.is_pointwise() {
                    gemm(kk, self.out_channels, p, weight, true, dyi, false, dxi, 0.0);
                } else {
                    gemm(kk, self.out_channels, p, weight, true, dyi, false, &mut dcol, 0.0);
                    self.col2im(&dcol, h, w, ho, wo, dxi);
                }
            }
        }
        dx
    }

    fn im2col(&self, x: &[f32], h: usize, w: usize, ho: usize, wo: usize, col: &mut [f32]) {
        let (k, s, pad) = (self.kernel, self.stride, self.padding as isize);
        let p = ho * wo;
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut col[((c * k + ki) * k + kj) * p..][..p];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - pad;
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kj) as isize - pad;
                            *d = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f32], h: usize, w: usize, ho: usize, wo: usize, dx: &mut [f32]) {
        let (k, s, pad) = (self.kernel, self.stride, self.padding as isize);
        let p = ho * wo;
        for c in 0..self.in_channels {
            let plane = &mut dx[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &col[((c * k + ki) * k + kj) * p..][..p];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * s + kj) as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn depthwise_forward(&self, weight: &[f32], x: &Tensor, y: &mut Tensor) {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (ho, wo) = (y.dim(2), y.dim(3));
        let (k, s, pad) = (self.kernel, self.stride, self.padding as isize);
        for i in 0..n {
            for ch in 0..c {
                let plane = &x.data()[((i * c) + ch) * h * w..][..h * w];
                let wk = &weight[ch * k * k..(ch + 1) * k * k];
                let out = &mut y.data_mut()[((i * c) + ch) * ho * wo..][..ho * wo];
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for ki in 0..k {
                            let iy = (oy * s + ki) as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kj in 0..k {
                                let ix = (ox * s + kj) as isize - pad;
                                if ix >= 0 && ix < w as isize {
                                    acc += wk[ki * k + kj] * plane[iy as usize * w + ix as usize];
                                }
                            }
                        }
                        out[oy * wo + ox] = acc;
                    }
                }
            }
        }
    }

    fn depthwise_backward(
        &self,
        weight: &[f32],
        grads: &mut Gradients,
        x: &Tensor,
        dy: &Tensor,
        need_dx: bool,
    ) -> Option<Tensor> {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (ho, wo) = (dy.dim(2), dy.dim(3));
        let (k, s, pad) = (self.kernel, self.stride, self.padding as isize);
        let mut dx = Tensor::zeros(x.shape());
        let dw = grads.get_mut(self.weight);
        for i in 0..n {
            for ch in 0..c {
                let base = ((i * c) + ch) * h * w;
                let plane = &x.data()[base..base + h * w];
                let g = &dy.data()[((i * c) + ch) * ho * wo..][..ho * wo];
                let wk = &weight[ch * k * k..(ch + 1) * k * k];
                for oy in 0..ho {
                    for ox in 0..wo {
                        let go = g[oy * wo + ox];
                        if go == 0.0 {
                            continue;
                        }
                        for ki in 0..k {
                            let iy = (oy * s + ki) as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kj in 0..k {
                                let ix = (ox * s + kj) as isize - pad;
                                if ix >= 0 && ix < w as isize {
                                    let xi = iy as usize * w + ix as usize;
                                    dw[ch * k * k + ki * k + kj] += go * plane[xi];
                                    if need_dx {
                                        dx.data_mut()[base + xi] += go * wk[ki * k + kj];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        need_dx.then_some(dx)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub eps: f32,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm2d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        BatchNorm2d {
            channels,
            eps: 1e-5,
            gamma: store.add(format!("{name}.weight"), &[channels], ParamKind::Trainable, vec![1.0; channels]),
            beta: store.add(format!("{name}.bias"), &[channels], ParamKind::Trainable, vec![0.0; channels]),
            running_mean: store.add(format!("{name}.running_mean"), &[channels], ParamKind::Buffer, vec![0.0; channels]),
            running_var: store.add(format!("{name}.running_var"), &[channels], ParamKind::Buffer, vec![1.0; channels]),
        }
    }

    /// Training mode normalizes with batch statistics and records them on the
    /// tape; evaluation mode uses the running statistics.
    pub fn forward(&self, store: &ParamStore, mut x: Tensor, train: bool, tape: Option<&mut Tape>) -> Tensor {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let hw = h * w;
        let m = n * hw;
        let gamma = store.get(self.gamma);
        let beta = store.get(self.beta);
        let (mean, var) = if train {
            let mut mean = vec![0.0f64; c];
            let mut sq = vec![0.0f64; c];
            for i in 0..n {
                for ch in 0..c {
                    let plane = &x.data()[(i * c + ch) * hw..][..hw];
                    let (mut s, mut s2) = (0.0f64, 0.0f64);
                    for &v in plane {
                        s += v as f64;
                        s2 += (v as f64) * (v as f64);
                    }
                    mean[ch] += s;
                    sq[ch] += s2;
                }
            }
            let mean: Vec<f32> = mean.iter().map(|s| (s / m as f64) as f32).collect();
            let var: Vec<f32> = sq
                .iter()
                .zip(&mean)
                .map(|(s2, mu)| ((s2 / m as f64) - (*mu as f64) * (*mu as f64)).max(0.0) as f32)
                .collect();
            (mean, var)
        } else {
            (store.get(self.running_mean).to_vec(), store.get(self.running_var).to_vec())
        };
        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let keep = tape.is_some();
        let mut x_hat = if keep { vec![0.0f32; x.len()] } else { Vec::new() };
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * hw;
                let (mu, is, g, b) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
                for j in off..off + hw {
                    let xh = (x.data()[j] - mu) * is;
                    if keep {
                        x_hat[j] = xh;
                    }
                    x.data_mut()[j] = g * xh + b;
                }
            }
        }
        if let Some(t) = tape {
            if train {
                let unbias = if m > 1 { m as f32 / (m - 1) as f32 } else { 1.0 };
                t.bn.push(BnObservation {
                    running_mean: self.running_mean,
                    running_var: self.running_var,
                    mean,
                    var: var.iter().map(|v| v * unbias).collect(),
                });
            }
            t.push(Saved::Bn { x_hat, inv_std, train });
        }
        x
    }

    pub fn backward(&self, store: &ParamStore, grads: &mut Gradients, dy: Tensor, tape: &mut Tape) -> Tensor {
        let (x_hat, inv_std, train) = match tape.pop() {
            Saved::Bn { x_hat, inv_std, train } => (x_hat, inv_std, train),
            _ => panic!("tape out of order: expected batch-norm record"),
        };
        let (n, c, h, w) = (dy.dim(0), dy.dim(1), dy.dim(2), dy.dim(3));
        let hw = h * w;
        let m = (n * hw) as f32;
        let gamma = store.get(self.gamma).to_vec();
        let mut dgamma = vec![0.0f32; c];
        let mut dbeta = vec![0.0f32; c];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * hw;
                let (mut sg, mut sb) = (0.0f32, 0.0f32);
                for j in off..off + hw {
                    sb += dy.data()[j];
                    sg += dy.data()[j] * x_hat[j];
                }
                dgamma[ch] += sg;
                dbeta[ch] += sb;
            }
        }
        let mut dx = dy;
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * hw;
                let k = gamma[ch] * inv_std[ch];
                if train {
                    let (db, dg) = (dbeta[ch] / m, dgamma[ch] / m);
                    for j in off..off + hw {
                        let d = dx.data()[j];
                        dx.data_mut()[j] = k * (d - db - x_hat[j] * dg);
                    }
                } else {
                    for j in off..off + hw {
                        dx.data_mut()[j] *= k;
                    }
                }
            }
        }
        for (g, d) in grads.get_mut(self.gamma).iter_mut().zip(&dgamma) {
            *g += d;
        }
        for (g, d) in grads.get_mut(self.beta).iter_mut().zip(&dbeta) {
            *g += d;
        }
        dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Relu6,
}

impl Activation {
    pub fn forward(self, mut x: Tensor, tape: Option<&mut Tape>) -> Tensor {
        let hi = match self {
            Activation::Relu => f32::INFINITY,
            Activation::Relu6 => 6.0,
        };
        let keep = tape.is_some();
        let mut mask = if keep { Vec::with_capacity(x.len()) } else { Vec::new() };
        for v in x.data_mut() {
            let pass = *v > 0.0 && *v < hi;
            *v = v.clamp(0.0, hi);
            if keep {
                mask.push(pass);
            }
        }
        if let Some(t) = tape {
            t.push(Saved::Mask(mask));
        }
        x
    }

    pub fn backward(self, mut dy: Tensor, tape: &mut Tape) -> Tensor {
        let mask = match tape.pop() {
            Saved::Mask(m) => m,
            _ => panic!("tape out of order: expected activation mask"),
        };
        for (d, pass) in dy.data_mut().iter_mut().zip(mask) {
            if !pass {
                *d = 0.0;
            }
        }
        dy
    }
}

/// 3x3 max pooling, stride 2, padding 1.
#[derive(Debug, Clone, Copy)]
pub struct MaxPool;

impl MaxPool {
    const K: usize = 3;
    const S: usize = 2;
    const P: isize = 1;

    pub fn out_hw(h: usize, w: usize) -> (usize, usize) {
        ((h + 2 - Self::K) / Self::S + 1, (w + 2 - Self::K) / Self::S + 1)
    }

    pub fn forward(x: Tensor, tape: Option<&mut Tape>) -> Tensor {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (ho, wo) = Self::out_hw(h, w);
        let mut y = Tensor::zeros(&[n, c, ho, wo]);
        let mut arg = vec![0u32; n * c * ho * wo];
        for plane_idx in 0..n * c {
            let plane = &x.data()[plane_idx * h * w..][..h * w];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_i = 0usize;
                    for ki in 0..Self::K {
                        let iy = (oy * Self::S + ki) as isize - Self::P;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..Self::K {
                            let ix = (ox * Self::S + kj) as isize - Self::P;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = iy as usize * w + ix as usize;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_i = idx;
                            }
                        }
                    }
                    let o = plane_idx * ho * wo + oy * wo + ox;
                    y.data_mut()[o] = best;
                    arg[o] = best_i as u32;
                }
            }
        }
        if let Some(t) = tape {
            t.push(Saved::Argmax(arg));
            t.push(Saved::Dims(vec![h, w]));
        }
        y
    }

    pub fn backward(dy: &Tensor, tape: &mut Tape) -> Tensor {
        let dims = match tape.pop() {
            Saved::Dims(d) => d,
            _ => panic!("tape out of order: expected pool dims"),
        };
        let arg = match tape.pop() {
            Saved::Argmax(a) => a,
            _ => panic!("tape out of order: expected pool argmax"),
        };
        let (n, c, ho, wo) = (dy.dim(0), dy.dim(1), dy.dim(2), dy.dim(3));
        let (h, w) = (dims[0], dims[1]);
        let mut dx = Tensor::zeros(&[n, c, h, w]);
        for plane_idx in 0..n * c {
            for j in 0..ho * wo {
                let o = plane_idx * ho * wo + j;
                dx.data_mut()[plane_idx * h * w + arg[o] as usize] += dy.data()[o];
            }
        }
        dx
    }
}

/// Spatial mean: `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool(x: &Tensor, tape: Option<&mut Tape>) -> Tensor {
    let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let hw = h * w;
    let mut y = Tensor::zeros(&[n, c]);
    for (i, out) in y.data_mut().iter_mut().enumerate() {
        *out = x.data()[i * hw..(i + 1) * hw].iter().sum::<f32>() / hw as f32;
    }
    if let Some(t) = tape {
        t.push(Saved::Dims(vec![h, w]));
    }
    y
}

pub fn global_avg_pool_backward(dy: &Tensor, tape: &mut Tape) -> Tensor {
    let dims = match tape.pop() {
        Saved::Dims(d) => d,
        _ => panic!("tape out of order: expected pool dims"),
    };
    let (n, c) = (dy.dim(0), dy.dim(1));
    let hw = dims[0] * dims[1];
    let mut dx = Tensor::zeros(&[n, c, dims[0], dims[1]]);
    for (i, g) in dy.data().iter().enumerate() {
        let v = g / hw as f32;
        dx.data_mut()[i * hw..(i + 1) * hw].fill(v);
    }
    dx
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Weights drawn from N(0, init_std^2), zero bias.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_features: usize,
        out_features: usize,
        init_std: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let dist = Normal::new(0.0f32, init_std).expect("positive std");
        let w = (0..in_features * out_features).map(|_| dist.sample(rng)).collect();
        Linear {
            in_features,
            out_features,
            weight: store.add(format!("{name}.weight"), &[out_features, in_features], ParamKind::Trainable, w),
            bias: store.add(format!("{name}.bias"), &[out_features], ParamKind::Trainable, vec![0.0; out_features]),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: Tensor, tape: Option<&mut Tape>) -> Tensor {
        let n = x.dim(0);
        let mut y = Tensor::zeros(&[n, self.out_features]);
        let bias = store.get(self.bias);
        for row in y.data_mut().chunks_mut(self.out_features) {
            row.copy_from_slice(bias);
        }
        gemm(
            n,
            self.in_features,
            self.out_features,
            x.data(),
            false,
            store.get(self.weight),
            true,
            y.data_mut(),
            1.0,
        );
        if let Some(t) = tape {
            t.push(Saved::Tensor(x));
        }
        y
    }

    pub fn backward(&self, store: &ParamStore, grads: &mut Gradients, dy: &Tensor, tape: &mut Tape) -> Tensor {
        let x = tape.pop_tensor();
        let n = x.dim(0);
        gemm(
            self.out_features,
            n,
            self.in_features,
            dy.data(),
            true,
            x.data(),
            false,
            grads.get_mut(self.weight),
            1.0,
        );
        let db = grads.get_mut(self.bias);
        for row in dy.data().chunks(self.out_features) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[n, self.in_features]);
        gemm(
            n,
            self.out_features,
            self.in_features,
            dy.data(),
            false,
            store.get(self.weight),
            false,
            dx.data_mut(),
            0.0,
        );
        dx
    }
}
