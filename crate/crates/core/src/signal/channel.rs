//! Received-signal model `S = Z·X + n` for a single receive antenna.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::frame::{centi_db, SignalFrame};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseMode {
    Noiseless,
    Awgn { snr_db: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Complex channel gain `Z`.
    pub gain: Complex64,
    /// Receive antennas; only 1 is supported.
    pub n_r: usize,
    pub noise: NoiseMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { gain: Complex64::new(1.0, 0.0), n_r: 1, noise: NoiseMode::Noiseless }
    }
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self { noise: NoiseMode::Awgn { snr_db, seed }, ..Self::default() }
    }

    /// Unit-magnitude gain with a uniformly random phase.
    pub fn random_phase(seed: u64) -> Self {
        let theta = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI);
        Self { gain: Complex64::from_polar(1.0, theta), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r != 1 {
            return Err(Error::invalid(format!("only single-antenna reception is supported, got n_r = {}", self.n_r)));
        }
        if !(self.gain.norm() > 0.0) {
            return Err(Error::invalid("channel gain must be nonzero"));
        }
        Ok(())
    }
}

/// Multiply by the channel gain, then add noise per the configured mode.
pub fn apply_channel(frame: &SignalFrame, ch: &ChannelConfig) -> Result<SignalFrame> {
    ch.validate()?;
    let mut out = frame.clone();
    if ch.gain != Complex64::new(1.0, 0.0) {
        for (i, q) in out.i.iter_mut().zip(out.q.iter_mut()) {
            let z = ch.gain * Complex64::new(*i as f64, *q as f64);
            *i = z.re as f32;
            *q = z.im as f32;
        }
    }
    match ch.noise {
        NoiseMode::Noiseless => Ok(out),
        NoiseMode::Awgn { snr_db, seed } => Ok(add_awgn(&out, snr_db, seed)),
    }
}

/// Add circular complex Gaussian noise of total variance
/// `P_signal / 10^(snr_db/10)`, half in each of I and Q, and record the SNR.
pub fn add_awgn(frame: &SignalFrame, snr_db: f64, seed: u64) -> SignalFrame {
    let sigma2 = frame.power() / 10f64.powf(snr_db / 10.0);
    let std = (sigma2 / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = frame.clone();
    for (i, q) in out.i.iter_mut().zip(out.q.iter_mut()) {
        let ni: f64 = rng.sample(StandardNormal);
        let nq: f64 = rng.sample(StandardNormal);
        *i = (*i as f64 + std * ni) as f32;
        *q = (*q as f64 + std * nq) as f32;
    }
    out.snr_centi_db = centi_db(snr_db);
    out
}
