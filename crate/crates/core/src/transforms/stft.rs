use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{IqDataset, TensorDataset};
use crate::error::{Error, Result};
use crate::signal::SignalFrame;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    /// `0.5(1 − cos(2πn/(L−1)))`, zero at both ends.
    Hann,
    /// `0.5(1 − cos(2πn/L))`, the DFT-even variant.
    HannPeriodic,
    Rectangular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelMode {
    /// Channel 0 = real part, channel 1 = imaginary part.
    RealImag,
    /// Channel 0 = magnitude, channel 1 = phase in radians.
    MagnitudePhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub overlap: usize,
    pub window: Window,
    pub fft_len: usize,
    /// Side of the square output image.
    pub out_size: usize,
    pub channel_mode: ChannelMode,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 128,
            overlap: 112,
            window: Window::Hann,
            fft_len: 128,
            out_size: 256,
            channel_mode: ChannelMode::RealImag,
        }
    }
}

impl StftConfig {
    pub fn hop(&self) -> usize {
        self.window_len - self.overlap
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.overlap >= self.window_len {
            return Err(Error::invalid(format!(
                "overlap {} must be below the window length {}",
                self.overlap, self.window_len
            )));
        }
        if self.fft_len < self.window_len {
            return Err(Error::invalid(format!(
                "FFT length {} is shorter than the window {}",
                self.fft_len, self.window_len
            )));
        }
        if self.out_size == 0 {
            return Err(Error::invalid("output image size must be positive"));
        }
        Ok(())
    }

    pub fn n_frames(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            (n - self.window_len) / self.hop() + 1
        }
    }
}

pub fn hann_window(kind: Window, len: usize) -> Vec<f64> {
    match kind {
        Window::Rectangular => vec![1.0; len],
        Window::Hann if len == 1 => vec![1.0],
        Window::Hann => (0..len).map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (len - 1) as f64).cos())).collect(),
        Window::HannPeriodic => (0..len).map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos())).collect(),
    }
}

/// Complex time-frequency matrix, frames as rows and DFT bins as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Stft {
    pub n_frames: usize,
    pub n_bins: usize,
    pub data: Vec<Complex64>,
}

impl Stft {
    pub fn at(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.n_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.n_bins..(frame + 1) * self.n_bins]
    }
}

/// Windowed sliding DFT with a full two-sided spectrum. Frames start at
/// multiples of the hop; no centering or end padding.
pub fn stft(x: &[Complex64], cfg: &StftConfig) -> Result<Stft> {
    cfg.validate()?;
    if x.len() < cfg.window_len {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than the {}-sample window",
            x.len(),
            cfg.window_len
        )));
    }
    let win = hann_window(cfg.window, cfg.window_len);
    let n_frames = cfg.n_frames(x.len());
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
    let mut data = vec![Complex64::new(0.0, 0.0); n_frames * cfg.fft_len];
    for (t, row) in data.chunks_exact_mut(cfg.fft_len).enumerate() {
        let start = t * cfg.hop();
        for (k, (r, w)) in row.iter_mut().zip(&win).enumerate() {
            *r = x[start + k] * *w;
        }
        fft.process(row);
    }
    Ok(Stft { n_frames, n_bins: cfg.fft_len, data })
}

/// Bilinear resampling of an `h×w` plane to `out_h×out_w` with corner
/// samples aligned, so equal sizes copy exactly.
pub fn resample_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), h * w);
    let coord = |i: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        if n_out == 1 || n_in == 1 {
            return (0, 0, 0.0);
        }
        let pos = (i * (n_in - 1)) as f64 / (n_out - 1) as f64;
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        let (r0, r1, fr) = coord(r, h, out_h);
        for c in 0..out_w {
            let (c0, c1, fc) = coord(c, w, out_w);
            let top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
            let bottom = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
            out.push(if fr == 0.0 { top } else { top * (1.0 - fr) + bottom * fr });
        }
    }
    out
}

/// Pack an STFT into a `[2,W,W]` image (rows follow frames, columns bins).
pub fn stft_to_image(s: &Stft, cfg: &StftConfig) -> Tensor<f32> {
    let w = cfg.out_size;
    let (a, b): (Vec<f64>, Vec<f64>) = match cfg.channel_mode {
        ChannelMode::RealImag => s.data.iter().map(|z| (z.re, z.im)).unzip(),
        ChannelMode::MagnitudePhase => s.data.iter().map(|z| (z.norm(), z.arg())).unzip(),
    };
    let mut data = Vec::with_capacity(2 * w * w);
    for plane in [a, b] {
        data.extend(resample_bilinear(&plane, s.n_frames, s.n_bins, w, w).into_iter().map(|v| v as f32));
    }
    Tensor::new(&[2, w, w], data).expect("image shape")
}

pub fn stft_image(frame: &SignalFrame, cfg: &StftConfig) -> Result<Tensor<f32>> {
    Ok(stft_to_image(&stft(&frame.to_complex(), cfg)?, cfg))
}

pub fn stft_dataset(ds: &IqDataset, cfg: &StftConfig) -> Result<TensorDataset> {
    cfg.validate()?;
    let w = cfg.out_size;
    let mut out = TensorDataset::new(ds.class_names.clone(), vec![2, w, w]);
    for f in &ds.frames {
        out.push(stft_image(f, cfg)?.data(), f.label, f.snr_centi_db, f.seed)?;
    }
    Ok(out)
}
