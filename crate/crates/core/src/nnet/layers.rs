//! Layer kernels with hand-written forward and backward passes.
//!
//! Convolutions zero-pad along the frequency axis and replicate-pad along
//! time: snapshot boundaries are arbitrary cuts of a stationary process, and
//! replicate padding keeps the encoder output exactly constant when the
//! input is constant in time, whatever the snapshot length.

use serde::{Deserialize, Serialize};

use super::tensor::{Matrix, Tensor};
use crate::rng::DetRng;

/// 2-D convolution: weight layout [out_c][in_c][kh][kw].
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Geometry of a conv layer, kept in the checkpoint descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvShape {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

impl Conv2d {
    pub fn new_he_init(
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        rng: &mut DetRng,
    ) -> Conv2d {
        let fan_in = (in_c * kernel.0 * kernel.1) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weight = (0..out_c * in_c * kernel.0 * kernel.1)
            .map(|_| rng.normal() * std)
            .collect();
        Conv2d { in_c, out_c, kernel, stride, pad, weight, bias: vec![0.0; out_c] }
    }

    pub fn shape(&self) -> ConvShape {
        ConvShape {
            in_c: self.in_c,
            out_c: self.out_c,
            kernel: self.kernel,
            stride: self.stride,
            pad: self.pad,
        }
    }

    pub fn from_shape(s: &ConvShape) -> Conv2d {
        Conv2d {
            in_c: s.in_c,
            out_c: s.out_c,
            kernel: s.kernel,
            stride: s.stride,
            pad: s.pad,
            weight: vec![0.0; s.out_c * s.in_c * s.kernel.0 * s.kernel.1],
            bias: vec![0.0; s.out_c],
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad.0 - self.kernel.0) / self.stride.0 + 1;
        let ow = (w + 2 * self.pad.1 - self.kernel.1) / self.stride.1 + 1;
        (oh, ow)
    }

    #[inline]
    fn widx(&self, oc: usize, ic: usize, kh: usize, kw: usize) -> usize {
        ((oc * self.in_c + ic) * self.kernel.0 + kh) * self.kernel.1 + kw
    }

    /// Time-axis loop split for one kernel column: output columns.
    /// [0, lo) read the replicated first input column, [lo, hi) read
    /// in-range columns at `ox*sw + off`, [hi, ow) read the replicated last
    /// column.
    #[inline]
    fn time_split(off: i64, sw: usize, w_in: usize, ow: usize) -> (usize, usize) {
        let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(sw).min(ow) };
        let hi = if w_in as i64 - 1 - off < 0 {
            lo
        } else {
            (((w_in as i64 - 1 - off) as usize / sw) + 1).clamp(lo, ow)
        };
        (lo, hi)
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.in_c, "conv input channels");
        let (oh, ow) = self.out_hw(x.h, x.w);
        let mut y = Tensor::zeros(x.n, self.out_c, oh, ow);
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.pad;

        for n in 0..x.n {
            for oc in 0..self.out_c {
                let ybase = (n * self.out_c + oc) * oh * ow;
                for ic in 0..self.in_c {
                    let xbase = (n * x.c + ic) * x.h * x.w;
                    for dh in 0..kh {
                        for dw in 0..kw {
                            let wv = self.weight[self.widx(oc, ic, dh, dw)];
                            if wv == 0.0 {
                                continue;
                            }
                            let off = dw as i64 - pw as i64;
                            let (lo, hi) = Self::time_split(off, sw, x.w, ow);
                            for oy in 0..oh {
                                let iy = (oy * sh + dh) as i64 - ph as i64;
                                if iy < 0 || iy >= x.h as i64 {
                                    continue; // zero pad in frequency
                                }
                                let xrow = &x.data[xbase + iy as usize * x.w..][..x.w];
                                let yrow = &mut y.data[ybase + oy * ow..][..ow];
                                let first = wv * xrow[0];
                                for v in &mut yrow[..lo] {
                                    *v += first;
                                }
                                if sw == 1 {
                                    let src = &xrow[(lo as i64 + off) as usize..];
                                    for (v, s) in yrow[lo..hi].iter_mut().zip(src) {
                                        *v += wv * s;
                                    }
                                } else {
                                    for (k, v) in yrow[lo..hi].iter_mut().enumerate() {
                                        *v += wv * xrow[(((lo + k) * sw) as i64 + off) as usize];
                                    }
                                }
                                let last = wv * xrow[x.w - 1];
                                for v in &mut yrow[hi..] {
                                    *v += last;
                                }
                            }
                        }
                    }
                }
                let b = self.bias[oc];
                for v in &mut y.data[ybase..ybase + oh * ow] {
                    *v += b;
                }
            }
        }
        y
    }

    /// Backward pass: accumulates weight/bias gradients and returns the
    /// input gradient.
    pub fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Tensor {
        let (oh, ow) = (grad_out.h, grad_out.w);
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.pad;
        let mut grad_in = Tensor::zeros(x.n, x.c, x.h, x.w);

        for n in 0..x.n {
            for oc in 0..self.out_c {
                let gbase = (n * self.out_c + oc) * oh * ow;
                for g in &grad_out.data[gbase..gbase + oh * ow] {
                    grad_b[oc] += *g;
                }
                for ic in 0..self.in_c {
                    let xbase = (n * x.c + ic) * x.h * x.w;
                    for dh in 0..kh {
                        for dw in 0..kw {
                            let widx = self.widx(oc, ic, dh, dw);
                            let wv = self.weight[widx];
                            let off = dw as i64 - pw as i64;
                            let (lo, hi) = Self::time_split(off, sw, x.w, ow);
                            let mut wg = 0.0;
                            for oy in 0..oh {
                                let iy = (oy * sh + dh) as i64 - ph as i64;
                                if iy < 0 || iy >= x.h as i64 {
                                    continue;
                                }
                                let xoff = xbase + iy as usize * x.w;
                                let grow = &grad_out.data[gbase + oy * ow..][..ow];
                                let mut edge = 0.0;
                                for &g in &grow[..lo] {
                                    edge += g;
                                }
                                if lo > 0 {
                                    wg += edge * x.data[xoff];
                                    grad_in.data[xoff] += edge * wv;
                                }
                                if sw == 1 {
                                    let s0 = xoff + (lo as i64 + off) as usize;
                                    let xs = &x.data[s0..s0 + (hi - lo)];
                                    for (k, &g) in grow[lo..hi].iter().enumerate() {
                                        wg += g * xs[k];
                                    }
                                    let gs = &mut grad_in.data[s0..s0 + (hi - lo)];
                                    for (k, &g) in grow[lo..hi].iter().enumerate() {
                                        gs[k] += g * wv;
                                    }
                                } else {
                                    for (k, &g) in grow[lo..hi].iter().enumerate() {
                                        let ix = xoff + (((lo + k) * sw) as i64 + off) as usize;
                                        wg += g * x.data[ix];
                                        grad_in.data[ix] += g * wv;
                                    }
                                }
                                if hi < ow {
                                    let mut edge = 0.0;
                                    for &g in &grow[hi..] {
                                        edge += g;
                                    }
                                    wg += edge * x.data[xoff + x.w - 1];
                                    grad_in.data[xoff + x.w - 1] += edge * wv;
                                }
                            }
                            grad_w[widx] += wg;
                        }
                    }
                }
            }
        }
        grad_in
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// ReLU; returns output and keeps the activation mask implicitly via the
/// output (grad flows where output > 0).
pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        n: x.n,
        c: x.c,
        h: x.h,
        w: x.w,
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

pub fn relu_backward(out: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor {
        n: out.n,
        c: out.c,
        h: out.h,
        w: out.w,
        data: out
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(&o, &g)| if o > 0.0 { g } else { 0.0 })
            .collect(),
    }
}

/// Max pooling with ceil-mode geometry; windows clamp at the borders so any
/// input size >= 1 yields at least one output cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool2d {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
}

impl MaxPool2d {
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h.saturating_sub(self.kernel.0) + self.stride.0 - 1) / self.stride.0 + 1;
        let ow = (w.saturating_sub(self.kernel.1) + self.stride.1 - 1) / self.stride.1 + 1;
        (oh, ow)
    }

    /// Returns (output, argmax flat indices into the input).
    pub fn forward(&self, x: &Tensor) -> (Tensor, Vec<usize>) {
        let (oh, ow) = self.out_hw(x.h, x.w);
        let mut y = Tensor::zeros(x.n, x.c, oh, ow);
        let mut arg = vec![0usize; y.data.len()];
        let mut yi = 0;
        for n in 0..x.n {
            for c in 0..x.c {
                let base = (n * x.c + c) * x.h * x.w;
                for oy in 0..oh {
                    let h0 = oy * self.stride.0;
                    let h1 = (h0 + self.kernel.0).min(x.h);
                    for ox in 0..ow {
                        let w0 = ox * self.stride.1;
                        let w1 = (w0 + self.kernel.1).min(x.w);
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = base + h0 * x.w + w0;
                        for iy in h0..h1 {
                            for ix in w0..w1 {
                                let i = base + iy * x.w + ix;
                                if x.data[i] > best {
                                    best = x.data[i];
                                    best_i = i;
                                }
                            }
                        }
                        y.data[yi] = best;
                        arg[yi] = best_i;
                        yi += 1;
                    }
                }
            }
        }
        (y, arg)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, argmax: &[usize]) -> Tensor {
        let mut grad_in = Tensor::zeros(x.n, x.c, x.h, x.w);
        for (g, &i) in grad_out.data.iter().zip(argmax) {
            grad_in.data[i] += g;
        }
        grad_in
    }
}

/// Mean over both spatial axes: (N, C, H, W) -> (N, C).
pub fn global_avg_pool(x: &Tensor) -> Matrix {
    let mut m = Matrix::zeros(x.n, x.c);
    let area = (x.h * x.w) as f64;
    for n in 0..x.n {
        for c in 0..x.c {
            let base = (n * x.c + c) * x.h * x.w;
            let sum: f64 = x.data[base..base + x.h * x.w].iter().sum();
            m.set(n, c, sum / area);
        }
    }
    m
}

pub fn global_avg_pool_backward(x: &Tensor, grad_out: &Matrix) -> Tensor {
    let mut grad_in = Tensor::zeros(x.n, x.c, x.h, x.w);
    let area = (x.h * x.w) as f64;
    for n in 0..x.n {
        for c in 0..x.c {
            let g = grad_out.at(n, c) / area;
            let base = (n * x.c + c) * x.h * x.w;
            for v in &mut grad_in.data[base..base + x.h * x.w] {
                *v = g;
            }
        }
    }
    grad_in
}

/// Fully connected layer: weight layout [out][in].
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new_he_init(in_dim: usize, out_dim: usize, rng: &mut DetRng) -> Linear {
        let std = (2.0 / in_dim as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            weight: (0..out_dim * in_dim).map(|_| rng.normal() * std).collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols, self.in_dim);
        let mut y = Matrix::zeros(x.rows, self.out_dim);
        for r in 0..x.rows {
            let xr = x.row(r);
            for o in 0..self.out_dim {
                let wrow = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.bias[o];
                for (a, b) in xr.iter().zip(wrow) {
                    acc += a * b;
                }
                y.set(r, o, acc);
            }
        }
        y
    }

    /// Accumulates parameter gradients, returns input gradient.
    pub fn backward(
        &self,
        x: &Matrix,
        grad_out: &Matrix,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Matrix {
        let mut grad_in = Matrix::zeros(x.rows, self.in_dim);
        for r in 0..x.rows {
            let xr = x.row(r);
            for o in 0..self.out_dim {
                let g = grad_out.at(r, o);
                grad_b[o] += g;
                let wrow = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                let gw = &mut grad_w[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    gw[i] += g * xr[i];
                    grad_in.data[r * self.in_dim + i] += g * wrow[i];
                }
            }
        }
        grad_in
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel_passes_through() {
        let mut x = Tensor::zeros(1, 1, 4, 3);
        for (i, v) in x.data.iter_mut().enumerate() {
            *v = i as f64;
        }
        let conv = Conv2d {
            in_c: 1,
            out_c: 1,
            kernel: (1, 1),
            stride: (1, 1),
            pad: (0, 0),
            weight: vec![1.0],
            bias: vec![0.0],
        };
        assert_eq!(conv.forward(&x).data, x.data);
    }

    #[test]
    fn conv_shapes_follow_stride_and_pad() {
        let conv = Conv2d {
            in_c: 1,
            out_c: 2,
            kernel: (3, 3),
            stride: (2, 2),
            pad: (1, 1),
            weight: vec![0.0; 18],
            bias: vec![0.0; 2],
        };
        assert_eq!(conv.out_hw(32, 17), (16, 9));
        assert_eq!(conv.out_hw(16, 9), (8, 5));
    }

    #[test]
    fn maxpool_ceil_mode_keeps_small_inputs() {
        let pool = MaxPool2d { kernel: (8, 2), stride: (8, 2) };
        assert_eq!(pool.out_hw(512, 34), (64, 17));
        assert_eq!(pool.out_hw(512, 1), (64, 1));
        assert_eq!(pool.out_hw(5, 1), (1, 1));
    }

    #[test]
    fn maxpool_picks_maxima_and_routes_gradient() {
        let mut x = Tensor::zeros(1, 1, 2, 4);
        x.data = vec![1.0, 5.0, 2.0, 0.5, 3.0, -1.0, 7.0, 2.0];
        let pool = MaxPool2d { kernel: (2, 2), stride: (2, 2) };
        let (y, arg) = pool.forward(&x);
        assert_eq!(y.data, vec![5.0, 7.0]);
        let grad_out = Tensor { n: 1, c: 1, h: 1, w: 2, data: vec![1.0, 2.0] };
        let grad_in = pool.backward(&x, &grad_out, &arg);
        assert_eq!(grad_in.data, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn gap_averages_each_channel() {
        let mut x = Tensor::zeros(2, 1, 2, 2);
        x.data = vec![1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 10.0, 10.0];
        let m = global_avg_pool(&x);
        assert_eq!(m.at(0, 0), 2.5);
        assert_eq!(m.at(1, 0), 10.0);
    }

    #[test]
    fn linear_matches_hand_product() {
        let lin = Linear {
            in_dim: 2,
            out_dim: 2,
            weight: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![0.5, -0.5],
        };
        let x = Matrix { rows: 1, cols: 2, data: vec![10.0, 1.0] };
        let y = lin.forward(&x);
        assert_eq!(y.data, vec![12.5, 33.5]);
    }
}
