//! Layer primitives with explicit forward and backward passes.
//!
//! Activations are stored channel-major (`[channels, batch, height, width]`)
//! so that a convolution over a whole batch is a single matrix product and
//! channel concatenation is a buffer append. Parameters live in flat slices;
//! each layer only records its offset into the owning parameter group.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::real::{gemm, Real, Strides};
use crate::seed::gaussian;
use crate::tensor::{Matrix, Tensor};

/// Channel-major activation buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Act<T> {
    pub c: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Act<T> {
    pub fn zeros(c: usize, n: usize, h: usize, w: usize) -> Self {
        Act {
            c,
            n,
            h,
            w,
            data: vec![T::zero(); c * n * h * w],
        }
    }

    /// Elements per channel (`batch * height * width`).
    pub fn plane(&self) -> usize {
        self.n * self.h * self.w
    }

    pub fn same_shape(&self, other: &Act<T>) -> bool {
        (self.c, self.n, self.h, self.w) == (other.c, other.n, other.h, other.w)
    }

    pub fn from_tensor(t: &Tensor<T>) -> Self {
        let [n, c, h, w] = t.shape();
        if c == 1 {
            return Act {
                c,
                n,
                h,
                w,
                data: t.data().to_vec(),
            };
        }
        let hw = h * w;
        let mut out = Act::zeros(c, n, h, w);
        for b in 0..n {
            for ch in 0..c {
                let src = &t.data()[(b * c + ch) * hw..][..hw];
                out.data[(ch * n + b) * hw..][..hw].copy_from_slice(src);
            }
        }
        out
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        let hw = self.h * self.w;
        if self.c == 1 {
            return Tensor::from_vec([self.n, 1, self.h, self.w], self.data.clone());
        }
        let mut data = vec![T::zero(); self.data.len()];
        for ch in 0..self.c {
            for b in 0..self.n {
                let src = &self.data[(ch * self.n + b) * hw..][..hw];
                data[(b * self.c + ch) * hw..][..hw].copy_from_slice(src);
            }
        }
        Tensor::from_vec([self.n, self.c, self.h, self.w], data)
    }

    pub fn add_assign(&mut self, other: &Act<T>) {
        assert!(self.same_shape(other), "activation shape mismatch");
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, &b)| *a += b);
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Square convolution with stride 1 and "same" zero padding (`k` is 1 or 3).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayout {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub offset: usize,
}

/// What the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ConvCache<T> {
    x: Act<T>,
}

impl ConvLayout {
    pub fn new(in_ch: usize, out_ch: usize, k: usize, offset: usize) -> Self {
        assert!(k == 1 || k == 3, "only 1x1 and 3x3 kernels are supported");
        ConvLayout {
            in_ch,
            out_ch,
            k,
            offset,
        }
    }

    fn taps(&self) -> usize {
        self.in_ch * self.k * self.k
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.taps()
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_ch
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    pub fn weight<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.offset..self.offset + self.weight_len()]
    }

    pub fn bias<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.offset + self.weight_len()..self.end()]
    }

    /// He-normal weights, zero bias.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, params: &mut [T], rng: &mut R) {
        let std = libm::sqrt(2.0 / self.taps() as f64);
        let wl = self.weight_len();
        for v in &mut params[self.offset..self.offset + wl] {
            *v = T::lit(gaussian(rng) * std);
        }
        for v in &mut params[self.offset + wl..self.end()] {
            *v = T::zero();
        }
    }

    pub fn forward<T: Real>(&self, params: &[T], x: &Act<T>) -> (Act<T>, ConvCache<T>) {
        assert_eq!(x.c, self.in_ch, "conv input channels");
        let np = x.plane();
        let hw = x.h * x.w;
        let taps = self.taps();
        let mut out = Act::zeros(self.out_ch, x.n, x.h, x.w);
        if self.k == 1 {
            gemm(
                self.out_ch,
                taps,
                np,
                T::one(),
                self.weight(params),
                Strides::rm(taps),
                &x.data,
                Strides::rm(np),
                T::zero(),
                &mut out.data,
                Strides::rm(np),
            );
        } else {
            // One sample at a time keeps the unfolded buffer cache-sized.
            let mut cols = vec![T::zero(); taps * hw];
            for b in 0..x.n {
                im2col3(x, b, &mut cols);
                gemm(
                    self.out_ch,
                    taps,
                    hw,
                    T::one(),
                    self.weight(params),
                    Strides::rm(taps),
                    &cols,
                    Strides::rm(hw),
                    T::zero(),
                    &mut out.data[b * hw..],
                    Strides::rm(np),
                );
            }
        }
        for (co, &b) in self.bias(params).iter().enumerate() {
            if b != T::zero() {
                out.data[co * np..(co + 1) * np]
                    .iter_mut()
                    .for_each(|v| *v += b);
            }
        }
        (out, ConvCache { x: x.clone() })
    }

    /// Accumulates parameter gradients into `grads` (when given) and returns
    /// the input gradient when `want_dx` is set.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        cache: &ConvCache<T>,
        dout: &Act<T>,
        grads: Option<&mut [T]>,
        want_dx: bool,
    ) -> Option<Act<T>> {
        let x = &cache.x;
        let np = x.plane();
        let hw = x.h * x.w;
        assert_eq!(
            dout.data.len(),
            self.out_ch * np,
            "conv upstream gradient shape"
        );
        let taps = self.taps();
        let w = self.weight(params);
        let mut grads = grads.map(|g| g[self.offset..self.end()].split_at_mut(self.weight_len()));
        if let Some((_, gb)) = grads.as_mut() {
            for (co, b) in gb.iter_mut().enumerate() {
                *b += dout.data[co * np..(co + 1) * np].iter().copied().sum::<T>();
            }
        }
        if self.k == 1 {
            if let Some((gw, _)) = grads {
                gemm(
                    self.out_ch,
                    np,
                    taps,
                    T::one(),
                    &dout.data,
                    Strides::rm(np),
                    &x.data,
                    Strides::tr(np),
                    T::one(),
                    gw,
                    Strides::rm(taps),
                );
            }
            if !want_dx {
                return None;
            }
            let mut dx = Act::zeros(self.in_ch, x.n, x.h, x.w);
            gemm(
                taps,
                self.out_ch,
                np,
                T::one(),
                w,
                Strides::tr(taps),
                &dout.data,
                Strides::rm(np),
                T::zero(),
                &mut dx.data,
                Strides::rm(np),
            );
            return Some(dx);
        }
        let mut cols = vec![T::zero(); taps * hw];
        let mut dx = want_dx.then(|| Act::zeros(self.in_ch, x.n, x.h, x.w));
        for b in 0..x.n {
            let dout_b = &dout.data[b * hw..];
            if let Some((gw, _)) = grads.as_mut() {
                im2col3(x, b, &mut cols);
                gemm(
                    self.out_ch,
                    hw,
                    taps,
                    T::one(),
                    dout_b,
                    Strides::rm(np),
                    &cols,
                    Strides::tr(hw),
                    T::one(),
                    gw,
                    Strides::rm(taps),
                );
            }
            if let Some(dx) = dx.as_mut() {
                gemm(
                    taps,
                    self.out_ch,
                    hw,
                    T::one(),
                    w,
                    Strides::tr(taps),
                    dout_b,
                    Strides::rm(np),
                    T::zero(),
                    &mut cols,
                    Strides::rm(hw),
                );
                col2im3(&cols, dx, b);
            }
        }
        dx
    }
}

/// Unfolds the 3x3 neighbourhoods of sample `b` into `cols`
/// (`[c*9, h*w]`, row `(ci*3+ky)*3+kx`); out-of-image taps are 0.
fn im2col3<T: Real>(x: &Act<T>, b: usize, cols: &mut [T]) {
    let (h, w) = (x.h, x.w);
    let (np, hw) = (x.plane(), h * w);
    for ci in 0..x.c {
        let src_c = &x.data[ci * np + b * hw..][..hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 3 + ky) * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..][..w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &src_c[sy as usize * w..][..w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col3`]: accumulates `dcols` into sample `b` of `dx`.
fn col2im3<T: Real>(dcols: &[T], dx: &mut Act<T>, b: usize) {
    let (h, w) = (dx.h, dx.w);
    let (np, hw) = (dx.plane(), h * w);
    for ci in 0..dx.c {
        let dst_c = &mut dx.data[ci * np + b * hw..][..hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &dcols[((ci * 3 + ky) * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..][..w];
                    let dst = &mut dst_c[sy as usize * w..][..w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, &s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, &s)| *d += s),
                    }
                }
            }
        }
    }
}

/// Fully connected layer, `[out, in]` weight followed by `[out]` bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearLayout {
    pub in_dim: usize,
    pub out_dim: usize,
    pub offset: usize,
}

impl LinearLayout {
    pub fn weight_len(&self) -> usize {
        self.in_dim * self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_dim
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, params: &mut [T], rng: &mut R) {
        let std = libm::sqrt(1.0 / self.in_dim as f64);
        let wl = self.weight_len();
        for v in &mut params[self.offset..self.offset + wl] {
            *v = T::lit(gaussian(rng) * std);
        }
        for v in &mut params[self.offset + wl..self.end()] {
            *v = T::zero();
        }
    }

    pub fn forward<T: Real>(&self, params: &[T], z: &Matrix<T>) -> Matrix<T> {
        assert_eq!(z.cols(), self.in_dim, "linear input width");
        let wl = self.weight_len();
        let w = &params[self.offset..self.offset + wl];
        let b = &params[self.offset + wl..self.end()];
        let mut y = Matrix::zeros(z.rows(), self.out_dim);
        gemm(
            z.rows(),
            self.in_dim,
            self.out_dim,
            T::one(),
            z.data(),
            Strides::rm(self.in_dim),
            w,
            Strides::tr(self.in_dim),
            T::zero(),
            y.data_mut(),
            Strides::rm(self.out_dim),
        );
        for r in 0..y.rows() {
            y.row_mut(r).iter_mut().zip(b).for_each(|(v, &bb)| *v += bb);
        }
        y
    }

    pub fn backward<T: Real>(
        &self,
        params: &[T],
        z: &Matrix<T>,
        dy: &Matrix<T>,
        grads: Option<&mut [T]>,
    ) -> Matrix<T> {
        let wl = self.weight_len();
        let n = z.rows();
        if let Some(g) = grads {
            let (gw, gb) = g[self.offset..self.end()].split_at_mut(wl);
            gemm(
                self.out_dim,
                n,
                self.in_dim,
                T::one(),
                dy.data(),
                Strides::tr(self.out_dim),
                z.data(),
                Strides::rm(self.in_dim),
                T::one(),
                gw,
                Strides::rm(self.in_dim),
            );
            for r in 0..n {
                gb.iter_mut().zip(dy.row(r)).for_each(|(g, &d)| *g += d);
            }
        }
        let mut dz = Matrix::zeros(n, self.in_dim);
        gemm(
            n,
            self.out_dim,
            self.in_dim,
            T::one(),
            dy.data(),
            Strides::rm(self.out_dim),
            &params[self.offset..self.offset + wl],
            Strides::rm(self.in_dim),
            T::zero(),
            dz.data_mut(),
            Strides::rm(self.in_dim),
        );
        dz
    }
}

/// Group normalization with a per-channel affine map. Statistics are taken per
/// sample and group, so outputs do not depend on the rest of the batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormLayout {
    pub channels: usize,
    pub groups: usize,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct NormCache<T> {
    xhat: Act<T>,
    /// `1 / sqrt(var + eps)` indexed `[group * n + sample]`.
    inv_std: Vec<T>,
}

const NORM_EPS: f64 = 1e-5;

impl NormLayout {
    /// Up to four groups; the group count always divides `channels`.
    pub fn new(channels: usize, offset: usize) -> Self {
        let groups = [4, 2, 1]
            .into_iter()
            .find(|g| channels % g == 0)
            .unwrap_or(1);
        NormLayout {
            channels,
            groups,
            offset,
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }

    pub fn end(&self) -> usize {
        self.offset + self.param_count()
    }

    /// Scale 1, shift 0.
    pub fn init<T: Real>(&self, params: &mut [T]) {
        let (g, b) = params[self.offset..self.end()].split_at_mut(self.channels);
        g.iter_mut().for_each(|v| *v = T::one());
        b.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn forward<T: Real>(&self, params: &[T], x: &Act<T>) -> (Act<T>, NormCache<T>) {
        assert_eq!(x.c, self.channels, "norm channel mismatch");
        let (n, hw) = (x.n, x.h * x.w);
        let cpg = self.channels / self.groups;
        let count = T::lit((cpg * hw) as f64);
        let eps = T::lit(NORM_EPS);
        let gamma = &params[self.offset..self.offset + self.channels];
        let beta = &params[self.offset + self.channels..self.end()];
        let mut xhat = Act::zeros(x.c, n, x.h, x.w);
        let mut out = Act::zeros(x.c, n, x.h, x.w);
        let mut inv_std = vec![T::zero(); self.groups * n];
        for g in 0..self.groups {
            for b in 0..n {
                let planes = || (g * cpg..(g + 1) * cpg).map(|c| (c * n + b) * hw);
                let mut mean = T::zero();
                for p in planes() {
                    mean += x.data[p..p + hw].iter().copied().sum::<T>();
                }
                mean /= count;
                let mut var = T::zero();
                for p in planes() {
                    for &v in &x.data[p..p + hw] {
                        var += (v - mean) * (v - mean);
                    }
                }
                let inv = T::one() / (var / count + eps).sqrt();
                inv_std[g * n + b] = inv;
                for (c, p) in (g * cpg..).zip(planes()) {
                    for i in p..p + hw {
                        let h = (x.data[i] - mean) * inv;
                        xhat.data[i] = h;
                        out.data[i] = gamma[c] * h + beta[c];
                    }
                }
            }
        }
        (out, NormCache { xhat, inv_std })
    }

    /// Accumulates scale/shift gradients into `grads` when given and returns
    /// the input gradient.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        cache: &NormCache<T>,
        dy: &Act<T>,
        grads: Option<&mut [T]>,
    ) -> Act<T> {
        let xhat = &cache.xhat;
        let (n, hw) = (xhat.n, xhat.h * xhat.w);
        let cpg = self.channels / self.groups;
        let count = T::lit((cpg * hw) as f64);
        let gamma = &params[self.offset..self.offset + self.channels];
        if let Some(grads) = grads {
            let (dg, db) = grads[self.offset..self.end()].split_at_mut(self.channels);
            for c in 0..self.channels {
                let p = c * n * hw..(c + 1) * n * hw;
                let (mut sg, mut sb) = (T::zero(), T::zero());
                for (&d, &h) in dy.data[p.clone()].iter().zip(&xhat.data[p]) {
                    sg += d * h;
                    sb += d;
                }
                dg[c] += sg;
                db[c] += sb;
            }
        }
        let mut dx = Act::zeros(xhat.c, n, xhat.h, xhat.w);
        for g in 0..self.groups {
            for b in 0..n {
                let planes = || (g * cpg..(g + 1) * cpg).map(|c| (c, (c * n + b) * hw));
                // dxhat = dy * gamma; dx = inv/M * (M dxhat - sum dxhat - xhat sum(dxhat xhat))
                let (mut s, mut sh) = (T::zero(), T::zero());
                for (c, p) in planes() {
                    for i in p..p + hw {
                        let d = dy.data[i] * gamma[c];
                        s += d;
                        sh += d * xhat.data[i];
                    }
                }
                let inv = cache.inv_std[g * n + b];
                let (s, sh) = (s / count, sh / count);
                for (c, p) in planes() {
                    for i in p..p + hw {
                        let d = dy.data[i] * gamma[c];
                        dx.data[i] = inv * (d - s - xhat.data[i] * sh);
                    }
                }
            }
        }
        dx
    }
}

pub fn relu<T: Real>(mut x: Act<T>) -> Act<T> {
    x.data.iter_mut().for_each(|v| {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    });
    x
}

/// Gradient through a ReLU given its output.
pub fn relu_backward<T: Real>(y: &Act<T>, mut dy: Act<T>) -> Act<T> {
    dy.data.iter_mut().zip(&y.data).for_each(|(d, &v)| {
        if !(v > T::zero()) {
            *d = T::zero();
        }
    });
    dy
}

/// Subnormal values become 0. A saturated sigmoid otherwise feeds subnormals
/// into every later product, which is many times slower on common CPUs.
fn flush<T: Real>(v: T) -> T {
    if v.abs() < T::min_positive_value() {
        T::zero()
    } else {
        v
    }
}

pub fn sigmoid<T: Real>(mut x: Act<T>) -> Act<T> {
    x.data
        .iter_mut()
        .for_each(|v| *v = flush(T::one() / (T::one() + (-*v).exp())));
    x
}

pub fn sigmoid_backward<T: Real>(y: &Act<T>, mut dy: Act<T>) -> Act<T> {
    dy.data
        .iter_mut()
        .zip(&y.data)
        .for_each(|(d, &v)| *d = flush(*d * v * (T::one() - v)));
    dy
}

/// 2x2 average pooling, stride 2.
pub fn avg_pool2<T: Real>(x: &Act<T>) -> Act<T> {
    assert!(
        x.h % 2 == 0 && x.w % 2 == 0,
        "pooling needs even spatial size"
    );
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Act::zeros(x.c, x.n, oh, ow);
    let quarter = T::lit(0.25);
    for p in 0..x.c * x.n {
        let src = &x.data[p * x.h * x.w..][..x.h * x.w];
        let dst = &mut out.data[p * oh * ow..][..oh * ow];
        for y in 0..oh {
            let r0 = &src[2 * y * x.w..][..x.w];
            let r1 = &src[(2 * y + 1) * x.w..][..x.w];
            for xx in 0..ow {
                dst[y * ow + xx] =
                    (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]) * quarter;
            }
        }
    }
    out
}

pub fn avg_pool2_backward<T: Real>(dy: &Act<T>) -> Act<T> {
    let (h, w) = (dy.h * 2, dy.w * 2);
    let mut dx = Act::zeros(dy.c, dy.n, h, w);
    let quarter = T::lit(0.25);
    for p in 0..dy.c * dy.n {
        let src = &dy.data[p * dy.h * dy.w..][..dy.h * dy.w];
        let dst = &mut dx.data[p * h * w..][..h * w];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = src[(y / 2) * dy.w + x / 2] * quarter;
            }
        }
    }
    dx
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2<T: Real>(x: &Act<T>) -> Act<T> {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut out = Act::zeros(x.c, x.n, h, w);
    for p in 0..x.c * x.n {
        let src = &x.data[p * x.h * x.w..][..x.h * x.w];
        let dst = &mut out.data[p * h * w..][..h * w];
        for y in 0..h {
            for xx in 0..w {
                dst[y * w + xx] = src[(y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Real>(dy: &Act<T>) -> Act<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Act::zeros(dy.c, dy.n, h, w);
    for p in 0..dy.c * dy.n {
        let src = &dy.data[p * dy.h * dy.w..][..dy.h * dy.w];
        let dst = &mut dx.data[p * h * w..][..h * w];
        for y in 0..dy.h {
            for x in 0..dy.w {
                dst[(y / 2) * w + x / 2] += src[y * dy.w + x];
            }
        }
    }
    dx
}

/// Channel concatenation `[a; b]`.
pub fn concat<T: Real>(a: &Act<T>, b: &Act<T>) -> Act<T> {
    assert_eq!((a.n, a.h, a.w), (b.n, b.h, b.w), "concat spatial mismatch");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Act {
        c: a.c + b.c,
        n: a.n,
        h: a.h,
        w: a.w,
        data,
    }
}

pub fn split_channels<T: Real>(d: Act<T>, first: usize) -> (Act<T>, Act<T>) {
    let np = d.plane();
    let Act {
        c,
        n,
        h,
        w,
        mut data,
    } = d;
    let tail = data.split_off(first * np);
    (
        Act {
            c: first,
            n,
            h,
            w,
            data,
        },
        Act {
            c: c - first,
            n,
            h,
            w,
            data: tail,
        },
    )
}

/// Global average pooling to a `[batch, channels]` matrix.
pub fn global_avg_pool<T: Real>(x: &Act<T>) -> Matrix<T> {
    let hw = x.h * x.w;
    let inv = T::one() / T::lit(hw as f64);
    let mut z = Matrix::zeros(x.n, x.c);
    for c in 0..x.c {
        for b in 0..x.n {
            let s: T = x.data[(c * x.n + b) * hw..][..hw].iter().copied().sum();
            z.row_mut(b)[c] = s * inv;
        }
    }
    z
}

pub fn global_avg_pool_backward<T: Real>(dz: &Matrix<T>, h: usize, w: usize) -> Act<T> {
    let (n, c) = (dz.rows(), dz.cols());
    let hw = h * w;
    let inv = T::one() / T::lit(hw as f64);
    let mut dx = Act::zeros(c, n, h, w);
    for ch in 0..c {
        for b in 0..n {
            let g = dz.row(b)[ch] * inv;
            dx.data[(ch * n + b) * hw..][..hw]
                .iter_mut()
                .for_each(|v| *v = g);
        }
    }
    dx
}
