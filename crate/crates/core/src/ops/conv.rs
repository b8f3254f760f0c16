//! 1-D and 2-D convolution, forward and backward.
//!
//! Convolutions use the cross-correlation convention: the kernel is not
//! flipped, so `y[o,i,j] = b[o] + Σ_c Σ_u Σ_v w[o,c,u,v] · x[c, i·s+u−p, j·s+v−p]`
//! with out-of-range input treated as zero. Both are lowered to
//! im2col followed by a GEMM per sample.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Kernel extent, stride, and zero padding along the two spatial axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeometry {
    /// Square kernel with the same stride and padding on both axes.
    pub fn square(kernel: usize, stride: usize, padding: usize) -> Self {
        Self { kh: kernel, kw: kernel, sh: stride, sw: stride, ph: padding, pw: padding }
    }

    /// 1-D convolution laid out on a height-1 plane.
    pub fn temporal(kernel: usize, stride: usize, padding: usize) -> Self {
        Self { kh: 1, kw: kernel, sh: 1, sw: stride, ph: 0, pw: padding }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kh == 0 || self.kw == 0 || self.sh == 0 || self.sw == 0 {
            return Err(Error::invalid(format!("degenerate convolution geometry {self:?}")));
        }
        if h + 2 * self.ph < self.kh || w + 2 * self.pw < self.kw {
            return Err(Error::shape(format!(
                "input plane {h}x{w} with padding ({}, {}) is smaller than kernel {}x{}",
                self.ph, self.pw, self.kh, self.kw
            )));
        }
        Ok((
            (h + 2 * self.ph - self.kh) / self.sh + 1,
            (w + 2 * self.pw - self.kw) / self.sw + 1,
        ))
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.sh == 1 && self.sw == 1 && self.ph == 0 && self.pw == 0
    }
}

/// Dimensions of a batched convolution resolved against its operands.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub oh: usize,
    pub ow: usize,
    pub geom: ConvGeometry,
}

impl ConvDims {
    /// `input` is `[B,C,H,W]`, `weights` is `[O,C,kh,kw]`.
    pub fn resolve(input: &[usize], weights: &[usize], geom: ConvGeometry) -> Result<Self> {
        if input.len() != 4 || weights.len() != 4 {
            return Err(Error::shape(format!(
                "convolution expects input [B,C,H,W] and weights [O,C,kh,kw], got {input:?} and {weights:?}"
            )));
        }
        if input[1] != weights[1] {
            return Err(Error::shape(format!(
                "input {input:?} has {} channels but weights {weights:?} expect {}",
                input[1], weights[1]
            )));
        }
        if weights[2] != geom.kh || weights[3] != geom.kw {
            return Err(Error::shape(format!(
                "weights {weights:?} disagree with kernel {}x{}",
                geom.kh, geom.kw
            )));
        }
        let (oh, ow) = geom.output_hw(input[2], input[3])?;
        Ok(Self {
            batch: input[0],
            c_in: input[1],
            h: input[2],
            w: input[3],
            c_out: weights[0],
            oh,
            ow,
            geom,
        })
    }

    fn patch(&self) -> usize {
        self.c_in * self.geom.kh * self.geom.kw
    }

    fn in_plane(&self) -> usize {
        self.c_in * self.h * self.w
    }

    fn out_plane(&self) -> usize {
        self.c_out * self.oh * self.ow
    }
}

/// Valid output columns `ox` for kernel tap `j`: those whose input index
/// `ox*s + j - p` falls inside `[0, w)`.
#[inline]
fn valid_range(w: usize, ow: usize, s: usize, j: usize, p: usize) -> (usize, usize) {
    // ox*s + j >= p  and  ox*s + j < w + p
    let lo = if j >= p { 0 } else { (p - j).div_ceil(s) };
    let hi = if w + p > j { ((w + p - j - 1) / s + 1).min(ow) } else { 0 };
    (lo.min(hi), hi)
}

fn im2col<T: Scalar>(x: &[T], d: &ConvDims, cols: &mut [T]) {
    let g = d.geom;
    let area = d.oh * d.ow;
    for c in 0..d.c_in {
        let plane = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * area;
                let (lo, hi) = valid_range(d.w, d.ow, g.sw, j, g.pw);
                for oy in 0..d.oh {
                    let dst = &mut cols[row + oy * d.ow..row + (oy + 1) * d.ow];
                    let iy = (oy * g.sh + i) as isize - g.ph as isize;
                    if iy < 0 || iy >= d.h as isize || lo >= hi {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    if g.sw == 1 {
                        let start = lo + j - g.pw;
                        dst[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                    } else {
                        for (ox, v) in dst.iter_mut().enumerate().take(hi).skip(lo) {
                            *v = src[ox * g.sw + j - g.pw];
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], d: &ConvDims, dx: &mut [T]) {
    let g = d.geom;
    let area = d.oh * d.ow;
    for c in 0..d.c_in {
        let plane = &mut dx[c * d.h * d.w..(c + 1) * d.h * d.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * area;
                let (lo, hi) = valid_range(d.w, d.ow, g.sw, j, g.pw);
                if lo >= hi {
                    continue;
                }
                for oy in 0..d.oh {
                    let iy = (oy * g.sh + i) as isize - g.ph as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let src = &cols[row + oy * d.ow..row + (oy + 1) * d.ow];
                    let dst = &mut plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    for ox in lo..hi {
                        dst[ox * g.sw + j - g.pw] += src[ox];
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward_raw<T: Scalar>(x: &[T], w: &[T], b: &[T], d: &ConvDims) -> Vec<T> {
    let area = d.oh * d.ow;
    let patch = d.patch();
    let mut y = vec![T::zero(); d.batch * d.out_plane()];
    let mut cols = if d.geom.is_pointwise() { Vec::new() } else { vec![T::zero(); patch * area] };
    for s in 0..d.batch {
        let xs = &x[s * d.in_plane()..(s + 1) * d.in_plane()];
        let ys = &mut y[s * d.out_plane()..(s + 1) * d.out_plane()];
        let src = if d.geom.is_pointwise() {
            xs
        } else {
            im2col(xs, d, &mut cols);
            &cols
        };
        T::gemm(d.c_out, patch, area, w, false, src, false, ys, false);
        for (row, &bias) in ys.chunks_exact_mut(area).zip(b) {
            row.iter_mut().for_each(|v| *v += bias);
        }
    }
    y
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub(crate) fn conv_backward_raw<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    d: &ConvDims,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let area = d.oh * d.ow;
    let patch = d.patch();
    let mut dx = vec![T::zero(); d.batch * d.in_plane()];
    let mut dw = vec![T::zero(); d.c_out * patch];
    let mut db = vec![T::zero(); d.c_out];
    let pointwise = d.geom.is_pointwise();
    let mut cols = if pointwise { Vec::new() } else { vec![T::zero(); patch * area] };
    let mut dcols = if pointwise { Vec::new() } else { vec![T::zero(); patch * area] };
    for s in 0..d.batch {
        let xs = &x[s * d.in_plane()..(s + 1) * d.in_plane()];
        let dys = &dy[s * d.out_plane()..(s + 1) * d.out_plane()];
        let dxs = &mut dx[s * d.in_plane()..(s + 1) * d.in_plane()];
        for (acc, row) in db.iter_mut().zip(dys.chunks_exact(area)) {
            *acc += row.iter().fold(T::zero(), |a, &v| a + v);
        }
        if pointwise {
            T::gemm(d.c_out, area, patch, dys, false, xs, true, &mut dw, true);
            T::gemm(patch, d.c_out, area, w, true, dys, false, dxs, false);
        } else {
            im2col(xs, d, &mut cols);
            T::gemm(d.c_out, area, patch, dys, false, &cols, true, &mut dw, true);
            T::gemm(patch, d.c_out, area, w, true, dys, false, &mut dcols, false);
            col2im(&dcols, d, dxs);
        }
    }
    (dx, dw, db)
}

fn check_bias<T: Scalar>(bias: &Tensor<T>, c_out: usize) -> Result<()> {
    if bias.shape() != [c_out] {
        return Err(Error::shape(format!(
            "bias {:?} does not match {c_out} output channels",
            bias.shape()
        )));
    }
    Ok(())
}

/// Lift a per-sample input to a batch of one; returns whether it was lifted.
fn batched_shape(shape: &[usize], sample_rank: usize) -> Result<(Vec<usize>, bool)> {
    if shape.len() == sample_rank {
        let mut s = vec![1];
        s.extend_from_slice(shape);
        Ok((s, true))
    } else if shape.len() == sample_rank + 1 {
        Ok((shape.to_vec(), false))
    } else {
        Err(Error::shape(format!(
            "expected a rank-{sample_rank} sample or rank-{} batch, got {shape:?}",
            sample_rank + 1
        )))
    }
}

/// Batched 2-D convolution on `[B,C,H,W]` with an explicit geometry.
pub fn conv2d_geom<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    geom: ConvGeometry,
) -> Result<Tensor<T>> {
    let d = ConvDims::resolve(input.shape(), weights.shape(), geom)?;
    check_bias(bias, d.c_out)?;
    let y = conv_forward_raw(input.data(), weights.data(), bias.data(), &d);
    Tensor::new(&[d.batch, d.c_out, d.oh, d.ow], y)
}

/// Gradients of [`conv2d_geom`] given the upstream gradient.
pub fn conv2d_geom_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    geom: ConvGeometry,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = ConvDims::resolve(input.shape(), weights.shape(), geom)?;
    let expected = [d.batch, d.c_out, d.oh, d.ow];
    if grad_out.shape() != expected {
        return Err(Error::shape(format!(
            "upstream gradient {:?} does not match convolution output {expected:?}",
            grad_out.shape()
        )));
    }
    let (dx, dw, db) = conv_backward_raw(input.data(), weights.data(), grad_out.data(), &d);
    Ok((
        Tensor::new(input.shape(), dx)?,
        Tensor::new(weights.shape(), dw)?,
        Tensor::new(&[d.c_out], db)?,
    ))
}

/// 2-D convolution of `[C,H,W]` (or a `[B,C,H,W]` batch) with square
/// kernels `[O,C,k,k]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (shape, lifted) = batched_shape(input.shape(), 3)?;
    if weights.rank() != 4 || weights.shape()[2] != weights.shape()[3] {
        return Err(Error::shape(format!(
            "conv2d weights must be [O,C,k,k], got {:?}",
            weights.shape()
        )));
    }
    let geom = ConvGeometry::square(weights.shape()[2], stride, padding);
    let y = conv2d_geom(&input.clone().reshape(&shape)?, weights, bias, geom)?;
    if lifted {
        let s = y.shape()[1..].to_vec();
        y.reshape(&s)
    } else {
        Ok(y)
    }
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (shape, lifted) = batched_shape(input.shape(), 3)?;
    let (gshape, _) = batched_shape(grad_out.shape(), 3)?;
    if weights.rank() != 4 {
        return Err(Error::shape(format!("conv2d weights must be rank 4, got {:?}", weights.shape())));
    }
    let geom = ConvGeometry::square(weights.shape()[2], stride, padding);
    let (dx, dw, db) = conv2d_geom_backward(
        &input.clone().reshape(&shape)?,
        weights,
        &grad_out.clone().reshape(&gshape)?,
        geom,
    )?;
    let dx = if lifted { dx.reshape(input.shape())? } else { dx };
    Ok((dx, dw, db))
}

/// 1-D convolution of `[C,L]` (or a `[B,C,L]` batch) with kernels `[O,C,k]`.
pub fn conv1d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (shape, lifted) = batched_shape(input.shape(), 2)?;
    let (x4, w4, geom) = lift_1d(input, &shape, weights, stride, padding)?;
    let y = conv2d_geom(&x4, &w4, bias, geom)?;
    let (b, o, l) = (y.shape()[0], y.shape()[1], y.shape()[3]);
    if lifted {
        y.reshape(&[o, l])
    } else {
        y.reshape(&[b, o, l])
    }
}

pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (shape, _) = batched_shape(input.shape(), 2)?;
    let (gshape, _) = batched_shape(grad_out.shape(), 2)?;
    let (x4, w4, geom) = lift_1d(input, &shape, weights, stride, padding)?;
    let g4 = grad_out.clone().reshape(&[gshape[0], gshape[1], 1, gshape[2]])?;
    let (dx, dw, db) = conv2d_geom_backward(&x4, &w4, &g4, geom)?;
    Ok((dx.reshape(input.shape())?, dw.reshape(weights.shape())?, db))
}

fn lift_1d<T: Scalar>(
    input: &Tensor<T>,
    batched: &[usize],
    weights: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>, ConvGeometry)> {
    let ws = weights.shape();
    if ws.len() != 3 {
        return Err(Error::shape(format!("conv1d weights must be [O,C,k], got {ws:?}")));
    }
    let x4 = input.clone().reshape(&[batched[0], batched[1], 1, batched[2]])?;
    let w4 = weights.clone().reshape(&[ws[0], ws[1], 1, ws[2]])?;
    Ok((x4, w4, ConvGeometry::temporal(ws[2], stride, padding)))
}
