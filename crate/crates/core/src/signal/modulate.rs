//! Noiseless baseband waveform generators.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::frame::SignalFrame;
use super::scheme::{ModScheme, Modulation, RadioMlScheme};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub subcarriers: usize,
    pub cyclic_prefix: usize,
}

/// Waveform parameters shared by all generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub samples_per_symbol: usize,
    /// Root-raised-cosine rolloff β.
    pub rrc_rolloff: f64,
    /// RRC half-length in symbols.
    pub rrc_span: usize,
    pub gmsk_bt: f64,
    /// Peak FM deviation as a fraction of the sample rate.
    pub fm_deviation: f64,
    /// FM message bandwidth as a fraction of the sample rate.
    pub fm_bandwidth: f64,
    pub ofdm: OfdmConfig,
    /// Master seed for dataset generation.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 8,
            rrc_rolloff: 0.35,
            rrc_span: 6,
            gmsk_bt: 0.3,
            fm_deviation: 0.1,
            fm_bandwidth: 0.05,
            ofdm: OfdmConfig { subcarriers: 64, cyclic_prefix: 16 },
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("synth config: {what}")));
        if self.samples_per_symbol < 2 {
            return bad("samples_per_symbol must be at least 2");
        }
        if !(self.rrc_rolloff > 0.0 && self.rrc_rolloff <= 1.0) {
            return bad("rrc_rolloff must lie in (0, 1]");
        }
        if self.rrc_span == 0 {
            return bad("rrc_span must be positive");
        }
        if !(self.gmsk_bt > 0.0 && self.fm_deviation > 0.0 && self.fm_bandwidth > 0.0) {
            return bad("gmsk_bt, fm_deviation and fm_bandwidth must be positive");
        }
        if self.fm_bandwidth >= 0.5 {
            return bad("fm_bandwidth must be below Nyquist");
        }
        if self.ofdm.subcarriers == 0 || self.ofdm.cyclic_prefix == 0 {
            return bad("OFDM subcarriers and cyclic prefix must be positive");
        }
        Ok(())
    }
}

/// Generate one noiseless frame of `n_samples` complex samples, scaled to
/// unit average power. The frame's label is the scheme's own code.
pub fn modulate(scheme: Modulation, n_samples: usize, cfg: &SynthConfig, seed: u64) -> Result<SignalFrame> {
    cfg.validate()?;
    if n_samples < cfg.samples_per_symbol {
        return Err(Error::invalid(format!(
            "{n_samples} samples is shorter than one symbol ({} samples)",
            cfg.samples_per_symbol
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = Generator { cfg, n: n_samples };
    let mut x = match scheme {
        Modulation::Rf1024(s) => match s {
            ModScheme::Qam16 => gen.linear(&mut rng, |r| qam_point(r, 4)),
            ModScheme::Qpsk => gen.linear(&mut rng, qpsk_point),
            ModScheme::Psk4 => {
                let mut phase = rng.random_range(0..4u32);
                gen.linear(&mut rng, move |r| {
                    phase = (phase + r.random_range(0..4u32)) % 4;
                    Complex64::from_polar(1.0, phase as f64 * PI / 2.0)
                })
            }
            ModScheme::Fsk2 => gen.cpfsk(&mut rng, 2, 1.0),
            ModScheme::Fsk4 => gen.cpfsk(&mut rng, 4, 1.0),
            ModScheme::Gmsk => gen.gaussian_fsk(&mut rng, cfg.gmsk_bt, 0.5),
            ModScheme::Fm => gen.fm(&mut rng),
            ModScheme::Ofdm => gen.ofdm(&mut rng),
        },
        Modulation::RadioMl(s) => match s {
            RadioMlScheme::Qpsk => gen.linear(&mut rng, qpsk_point),
            RadioMlScheme::Psk8 => {
                gen.linear(&mut rng, |r| Complex64::from_polar(1.0, r.random_range(0..8u32) as f64 * PI / 4.0))
            }
            RadioMlScheme::Qam16 => gen.linear(&mut rng, |r| qam_point(r, 4)),
            RadioMlScheme::Qam64 => gen.linear(&mut rng, |r| qam_point(r, 8)),
            RadioMlScheme::Bpsk => gen.linear(&mut rng, |r| Complex64::new(pam_level(r, 2), 0.0)),
            RadioMlScheme::Pam4 => gen.linear(&mut rng, |r| Complex64::new(pam_level(r, 4), 0.0)),
            RadioMlScheme::Cpfsk => gen.cpfsk(&mut rng, 2, 0.5),
            RadioMlScheme::Gfsk => gen.gaussian_fsk(&mut rng, 0.35, 1.0),
            RadioMlScheme::Wbfm => gen.fm(&mut rng),
            RadioMlScheme::AmDsb => {
                let m = gen.message(&mut rng, gen.n);
                m.iter().map(|&v| Complex64::new(1.0 + 0.5 * v, 0.0)).collect()
            }
            RadioMlScheme::AmSsb => {
                let m = gen.message(&mut rng, gen.n);
                analytic_signal(&m)
            }
        },
    };
    normalize_power(&mut x)?;
    Ok(SignalFrame::from_complex(&x, scheme.code(), seed))
}

/// Gray-coded QPSK on the diagonals: `(±1 ± j)/√2`.
pub fn qpsk_point<R: Rng>(rng: &mut R) -> Complex64 {
    let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

/// Amplitude level from `{±1, ±3, …, ±(m−1)}` scaled to unit mean energy.
fn pam_level<R: Rng>(rng: &mut R, m: u32) -> f64 {
    let k = rng.random_range(0..m) as f64;
    let scale = ((m * m - 1) as f64 / 3.0).sqrt();
    (2.0 * k - (m - 1) as f64) / scale
}

/// Square QAM with `side × side` points at unit mean energy; 16-QAM
/// (`side = 4`) lands on `{±1,±3}²/√10`.
pub fn qam_point<R: Rng>(rng: &mut R, side: u32) -> Complex64 {
    let scale = (2.0 * (side * side - 1) as f64 / 3.0).sqrt();
    let level = |r: &mut R| (2.0 * r.random_range(0..side) as f64 - (side - 1) as f64) / scale;
    let re = level(rng);
    let im = level(rng);
    Complex64::new(re, im)
}

/// Root-raised-cosine impulse response over `±span` symbols, unit energy.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let b = rolloff;
    let half = (span * sps) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / sps as f64;
            if k == 0 {
                1.0 - b + 4.0 * b / PI
            } else if ((4.0 * b * t).abs() - 1.0).abs() < 1e-9 {
                (b / 2f64.sqrt())
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|v| v * v).sum();
    taps.iter_mut().for_each(|v| *v /= energy.sqrt());
    taps
}

fn gaussian_taps(bt: f64, sps: usize, span: usize) -> Vec<f64> {
    let sigma = (2f64.ln()).sqrt() / (2.0 * PI * bt);
    let half = (span * sps) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / sps as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|v| *v /= sum);
    taps
}

fn normalize_power(x: &mut [Complex64]) -> Result<()> {
    let p = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("generated waveform has no power"));
    }
    let s = p.sqrt().recip();
    x.iter_mut().for_each(|z| *z *= s);
    Ok(())
}

/// Analytic signal `m + j·H{m}` via a one-sided spectrum.
fn analytic_signal(m: &[f64]) -> Vec<Complex64> {
    let n = m.len();
    let mut buf: Vec<Complex64> = m.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= gain / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    n: usize,
}

impl Generator<'_> {
    /// Pulse-shape i.i.d. symbols with the RRC filter. Frame sample 0 sits
    /// on a symbol center, and every retained sample sees a full filter.
    fn linear<R: Rng>(&self, rng: &mut R, mut symbol: impl FnMut(&mut R) -> Complex64) -> Vec<Complex64> {
        let sps = self.cfg.samples_per_symbol;
        let span = self.cfg.rrc_span;
        let taps = rrc_taps(self.cfg.rrc_rolloff, sps, span);
        let n_sym = self.n.div_ceil(sps) + 2 * span + 1;
        let syms: Vec<Complex64> = (0..n_sym).map(|_| symbol(rng)).collect();
        let delay = span * sps;
        (0..self.n)
            .map(|m| {
                // Absolute time of frame sample m, in samples from symbol 0.
                let t = m + span * sps;
                let first = (t + delay).saturating_sub(2 * delay).div_ceil(sps);
                let last = ((t + delay) / sps).min(n_sym - 1);
                (first..=last).fold(Complex64::new(0.0, 0.0), |acc, i| {
                    acc + syms[i] * taps[t + delay - i * sps]
                })
            })
            .collect()
    }

    /// Continuous-phase M-FSK with rectangular frequency pulses and
    /// modulation index `h`: tone `d·h/(2·sps)` cycles/sample for
    /// `d ∈ {±1, ±3, …}`.
    fn cpfsk<R: Rng>(&self, rng: &mut R, m: u32, h: f64) -> Vec<Complex64> {
        let sps = self.cfg.samples_per_symbol;
        let mut phase = rng.random_range(0.0..2.0 * PI);
        let mut out = Vec::with_capacity(self.n);
        let mut d = 0.0;
        for k in 0..self.n {
            if k % sps == 0 {
                d = 2.0 * rng.random_range(0..m) as f64 - (m - 1) as f64;
            }
            out.push(Complex64::from_polar(1.0, phase));
            phase += PI * h * d / sps as f64;
        }
        out
    }

    /// Gaussian-filtered binary CPFSK; `h = 0.5` is GMSK.
    fn gaussian_fsk<R: Rng>(&self, rng: &mut R, bt: f64, h: f64) -> Vec<Complex64> {
        let sps = self.cfg.samples_per_symbol;
        let span = 2;
        let taps = gaussian_taps(bt, sps, span);
        let lead = span * sps;
        let total = self.n + 2 * lead;
        let n_sym = total.div_ceil(sps);
        let bits: Vec<f64> = (0..n_sym).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let nrz: Vec<f64> = (0..total).map(|k| bits[k / sps]).collect();
        let mut phase = rng.random_range(0.0..2.0 * PI);
        let mut out = Vec::with_capacity(self.n);
        for k in lead..lead + self.n {
            let f: f64 = taps.iter().enumerate().map(|(j, &g)| g * nrz[k + lead - j]).sum();
            out.push(Complex64::from_polar(1.0, phase));
            phase += PI * h * f / sps as f64;
        }
        out
    }

    /// Random message low-passed to `fm_bandwidth`, peak magnitude 1.
    fn message<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let half = 64usize;
        let fc = self.cfg.fm_bandwidth;
        let taps: Vec<f64> = (0..=2 * half)
            .map(|k| {
                let t = k as f64 - half as f64;
                let sinc = if t == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * t).sin() / (PI * t) };
                let window = 0.54 - 0.46 * (2.0 * PI * k as f64 / (2 * half) as f64).cos();
                sinc * window
            })
            .collect();
        let noise: Vec<f64> = (0..n + 2 * half).map(|_| rng.sample(StandardNormal)).collect();
        let mut m: Vec<f64> = (0..n)
            .map(|i| taps.iter().enumerate().map(|(j, &t)| t * noise[i + 2 * half - j]).sum())
            .collect();
        let peak = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak > 0.0 {
            m.iter_mut().for_each(|v| *v /= peak);
        }
        m
    }

    fn fm<R: Rng>(&self, rng: &mut R) -> Vec<Complex64> {
        let m = self.message(rng, self.n);
        let mut phase = rng.random_range(0.0..2.0 * PI);
        m.iter()
            .map(|&v| {
                let z = Complex64::from_polar(1.0, phase);
                phase += 2.0 * PI * self.cfg.fm_deviation * v;
                z
            })
            .collect()
    }

    /// QPSK on every subcarrier, unitary IDFT, cyclic prefix; the frame
    /// starts at a random offset into the first OFDM symbol.
    fn ofdm<R: Rng>(&self, rng: &mut R) -> Vec<Complex64> {
        let OfdmConfig { subcarriers: nfft, cyclic_prefix: cp } = self.cfg.ofdm;
        let sym_len = nfft + cp;
        let offset = rng.random_range(0..sym_len);
        let n_sym = (self.n + offset).div_ceil(sym_len);
        let ifft = FftPlanner::new().plan_fft_inverse(nfft);
        let scale = (nfft as f64).sqrt().recip();
        let mut stream = Vec::with_capacity(n_sym * sym_len);
        for _ in 0..n_sym {
            let mut buf: Vec<Complex64> = (0..nfft).map(|_| qpsk_point(rng)).collect();
            ifft.process(&mut buf);
            buf.iter_mut().for_each(|z| *z *= scale);
            stream.extend_from_slice(&buf[nfft - cp..]);
            stream.extend_from_slice(&buf);
        }
        stream[offset..offset + self.n].to_vec()
    }
}
