use num_complex::Complex64;

use crate::error::{Error, Result};

/// Sentinel SNR for frames that carry no noise.
pub const NOISELESS_CENTI_DB: i32 = i32::MAX;

/// One labeled observation: a complex baseband sequence stored as a 2×N
/// real matrix whose first row is I and second row is Q.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalFrame {
    pub i: Vec<f32>,
    pub q: Vec<f32>,
    /// Class index within the owning dataset.
    pub label: u16,
    /// SNR in hundredths of a dB, or [`NOISELESS_CENTI_DB`].
    pub snr_centi_db: i32,
    /// Seed the frame was generated from.
    pub seed: u64,
}

impl SignalFrame {
    pub fn from_complex(iq: &[Complex64], label: u16, seed: u64) -> Self {
        Self {
            i: iq.iter().map(|z| z.re as f32).collect(),
            q: iq.iter().map(|z| z.im as f32).collect(),
            label,
            snr_centi_db: NOISELESS_CENTI_DB,
            seed,
        }
    }

    pub fn new(i: Vec<f32>, q: Vec<f32>, label: u16, snr_centi_db: i32, seed: u64) -> Result<Self> {
        if i.len() != q.len() {
            return Err(Error::shape(format!(
                "I row has {} samples but Q row has {}",
                i.len(),
                q.len()
            )));
        }
        Ok(Self { i, q, label, snr_centi_db, seed })
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.i.iter().zip(&self.q).map(|(&a, &b)| Complex64::new(a as f64, b as f64)).collect()
    }

    /// Mean of |x|² over the frame.
    pub fn power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: f64 = self.i.iter().zip(&self.q).map(|(&a, &b)| (a as f64).powi(2) + (b as f64).powi(2)).sum();
        s / self.len() as f64
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_centi_db == NOISELESS_CENTI_DB
    }

    /// Recorded SNR in dB; `+∞` for noiseless frames.
    pub fn snr_db(&self) -> f64 {
        if self.is_noiseless() {
            f64::INFINITY
        } else {
            self.snr_centi_db as f64 / 100.0
        }
    }
}

pub(crate) fn centi_db(snr_db: f64) -> i32 {
    (snr_db * 100.0).round() as i32
}
