use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::dataset::{IqDataset, SampleSource, TensorDataset};
use crate::error::{Error, Result};
use crate::ops::{conv2d_geom, maxpool2d, swap_inner_axes, ConvGeometry};
use crate::tensor::{Scalar, Tensor};

/// Convolutional transform: treat the 2×N frame as a one-channel image,
/// convolve with `filters` 3×3 kernels, swap the filter and I/Q axes, then
/// max-pool along time by 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtConfig {
    pub filters: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub pool: (usize, usize),
    /// Whether the weights are trained with the downstream network.
    pub learnable: bool,
}

impl Default for CtConfig {
    fn default() -> Self {
        Self::for_length(1024)
    }
}

impl CtConfig {
    /// Geometry that yields a square `2 × N/4 × N/4` output.
    pub fn for_length(n: usize) -> Self {
        Self { filters: n / 4, kernel: (3, 3), stride: 1, padding: 1, pool: (1, 4), learnable: true }
    }

    pub fn geometry(&self) -> ConvGeometry {
        ConvGeometry { kh: self.kernel.0, kw: self.kernel.1, sh: self.stride, sw: self.stride, ph: self.padding, pw: self.padding }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.filters, 1, self.kernel.0, self.kernel.1]
    }

    /// Output shape for one frame of `n` samples.
    pub fn output_shape(&self, n: usize) -> Result<[usize; 3]> {
        if self.filters == 0 {
            return Err(Error::invalid("convolutional transform needs at least one filter"));
        }
        if n % self.pool.1 != 0 {
            return Err(Error::shape(format!(
                "frame length {n} is not divisible by the pool width {}",
                self.pool.1
            )));
        }
        let (h, w) = self.geometry().output_hw(2, n)?;
        if h % self.pool.0 != 0 || w % self.pool.1 != 0 {
            return Err(Error::shape(format!("conv output 2x{w} does not tile the ({},{}) pool", self.pool.0, self.pool.1)));
        }
        Ok([h / self.pool.0, self.filters, w / self.pool.1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CtWeights<T = f32> {
    /// `[F,1,kh,kw]`
    pub weights: Tensor<T>,
    /// `[F]`
    pub bias: Tensor<T>,
}

/// Uniform ±sqrt(6/fan_in) kernels and zero bias, reproducible from `seed`.
pub fn init_ct_weights<T: Scalar>(cfg: &CtConfig, seed: u64) -> CtWeights<T> {
    let shape = cfg.weight_shape();
    let bound = (6.0 / (cfg.kernel.0 * cfg.kernel.1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CtWeights {
        weights: Tensor::from_fn(&shape, |_| T::from_f64(rng.random_range(-bound..bound))),
        bias: Tensor::zeros(&[cfg.filters]),
    }
}

fn as_image<T: Scalar>(frames: &Tensor<T>) -> Result<Tensor<T>> {
    match *frames.shape() {
        [2, n] => frames.clone().reshape(&[1, 1, 2, n]),
        [b, 2, n] => frames.clone().reshape(&[b, 1, 2, n]),
        ref s => Err(Error::shape(format!("convolutional transform expects [2,N] or [B,2,N], got {s:?}"))),
    }
}

/// Apply the transform to `[B,2,N]` (or a single `[2,N]`) frames, giving
/// `[B,2,F,N/4]` (or `[2,F,N/4]`).
pub fn conv_transform<T: Scalar>(frames: &Tensor<T>, cfg: &CtConfig, w: &CtWeights<T>) -> Result<Tensor<T>> {
    let single = frames.rank() == 2;
    let n = *frames.shape().last().unwrap_or(&0);
    let [h, f, wo] = cfg.output_shape(n)?;
    let x = as_image(frames)?;
    let b = x.shape()[0];
    let y = conv2d_geom(&x, &w.weights, &w.bias, cfg.geometry())?;
    let y = swap_inner_axes(&y)?;
    let y = maxpool2d(&y, cfg.pool.0, cfg.pool.1)?.output;
    if single {
        y.reshape(&[h, f, wo])
    } else {
        debug_assert_eq!(y.shape(), &[b, h, f, wo]);
        Ok(y)
    }
}

/// Differentiable transform on a tape: `[B,2,N]` → `[B,2,F,N/4]`.
pub fn conv_transform_tape<T: Scalar>(tape: &mut Tape<T>, x: Var, weights: Var, bias: Var, cfg: &CtConfig) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let [b, two, n] = shape[..] else {
        return Err(Error::shape(format!("convolutional transform expects [B,2,N], got {shape:?}")));
    };
    if two != 2 {
        return Err(Error::shape(format!("convolutional transform expects 2 I/Q rows, got {two}")));
    }
    cfg.output_shape(n)?;
    let img = tape.reshape(x, &[b, 1, 2, n])?;
    let y = tape.conv(img, weights, bias, cfg.geometry())?;
    let y = tape.swap_axes(y)?;
    tape.maxpool2d(y, cfg.pool.0, cfg.pool.1)
}

/// Transform every frame with fixed weights into a tensor dataset.
pub fn conv_transform_dataset(ds: &IqDataset, cfg: &CtConfig, w: &CtWeights<f32>) -> Result<TensorDataset> {
    let shape = cfg.output_shape(ds.n_samples)?.to_vec();
    let mut out = TensorDataset::new(ds.class_names.clone(), shape);
    let mut buf = vec![0.0f32; 2 * ds.n_samples];
    for (k, f) in ds.frames.iter().enumerate() {
        ds.write_sample(k, &mut buf);
        let x = Tensor::new(&[2, ds.n_samples], buf.clone())?;
        let y = conv_transform(&x, cfg, w)?;
        out.push(y.data(), f.label, f.snr_centi_db, f.seed)?;
    }
    Ok(out)
}
