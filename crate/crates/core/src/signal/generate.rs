//! Labeled dataset synthesis with deterministic per-frame seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::add_awgn;
use super::modulate::{modulate, SynthConfig};
use super::scheme::Modulation;
use crate::dataset::{IqDataset, SplitDataset};
use crate::error::{Error, Result};

/// How each frame's SNR is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SnrPolicy {
    Noiseless,
    Fixed(f64),
    /// Independent uniform draw from the grid for every frame.
    Uniform(Vec<f64>),
    /// Frame `k` of each class gets `grid[k % grid.len()]`, so every
    /// (class, SNR) cell is equally populated.
    Stratified(Vec<f64>),
}

impl SnrPolicy {
    /// `lo, lo+step, …` up to and including `hi`.
    pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        assert!(step > 0.0 && hi >= lo, "bad SNR grid {lo}..{hi} step {step}");
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| lo + step * k as f64).collect()
    }

    fn pick(&self, index: usize, seed: u64) -> Option<f64> {
        match self {
            SnrPolicy::Noiseless => None,
            SnrPolicy::Fixed(db) => Some(*db),
            SnrPolicy::Uniform(grid) => {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5EED_5A12));
                Some(grid[rng.random_range(0..grid.len())])
            }
            SnrPolicy::Stratified(grid) => Some(grid[index % grid.len()]),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SnrPolicy::Uniform(g) | SnrPolicy::Stratified(g) if g.is_empty() => {
                Err(Error::invalid("SNR grid is empty"))
            }
            _ => Ok(()),
        }
    }
}

/// SplitMix64 output function.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of frame `index` of class `class` in split `split` (0 train, 1 test).
pub fn frame_seed(master: u64, split: u64, class: u64, index: u64) -> u64 {
    [split, class, index].iter().fold(splitmix64(master), |acc, &v| splitmix64(acc ^ splitmix64(v)))
}

/// Build train and test sets of `n_samples`-long frames for `classes`;
/// labels are positions in `classes`.
pub fn generate_dataset(
    classes: &[Modulation],
    per_class_train: usize,
    per_class_test: usize,
    n_samples: usize,
    snr: &SnrPolicy,
    cfg: &SynthConfig,
) -> Result<SplitDataset> {
    if classes.is_empty() || per_class_train == 0 || per_class_test == 0 {
        return Err(Error::invalid("need at least one class and positive per-class counts"));
    }
    if classes.len() > u16::MAX as usize {
        return Err(Error::invalid("too many classes"));
    }
    cfg.validate()?;
    snr.validate()?;
    let names: Vec<String> = classes.iter().map(|c| c.name().to_string()).collect();
    let build = |split: u64, per_class: usize| -> Result<IqDataset> {
        let mut ds = IqDataset::new(names.clone(), n_samples);
        for (c, &scheme) in classes.iter().enumerate() {
            for k in 0..per_class {
                let seed = frame_seed(cfg.seed, split, c as u64, k as u64);
                let mut frame = modulate(scheme, n_samples, cfg, seed)?;
                if let Some(db) = snr.pick(k, seed) {
                    frame = add_awgn(&frame, db, splitmix64(seed ^ 0x0A15_E000));
                }
                frame.label = c as u16;
                ds.push(frame)?;
            }
        }
        Ok(ds)
    };
    Ok(SplitDataset { train: build(0, per_class_train)?, test: build(1, per_class_test)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ModScheme;

    #[test]
    fn grid_endpoints() {
        let g = SnrPolicy::grid(-20.0, 18.0, 2.0);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], -20.0);
        assert_eq!(g[19], 18.0);
    }

    #[test]
    fn seeds_differ_across_split_class_index() {
        let a = frame_seed(1, 0, 0, 0);
        assert_ne!(a, frame_seed(1, 1, 0, 0));
        assert_ne!(a, frame_seed(1, 0, 1, 0));
        assert_ne!(a, frame_seed(1, 0, 0, 1));
        assert_ne!(a, frame_seed(2, 0, 0, 0));
    }

    #[test]
    fn labels_follow_class_order() {
        let classes = [ModScheme::Fsk4.into(), ModScheme::Qpsk.into()];
        let ds = generate_dataset(&classes, 3, 2, 64, &SnrPolicy::Fixed(10.0), &SynthConfig::default()).unwrap();
        assert_eq!(ds.train.len(), 6);
        assert_eq!(ds.test.len(), 4);
        assert_eq!(ds.train.class_names, vec!["fsk4", "qpsk"]);
        assert!(ds.train.frames[..3].iter().all(|f| f.label == 0));
        assert!(ds.train.frames[3..].iter().all(|f| f.label == 1 && f.snr_db() == 10.0));
    }

    #[test]
    fn rejects_empty_requests() {
        let cfg = SynthConfig::default();
        assert!(generate_dataset(&[], 1, 1, 64, &SnrPolicy::Noiseless, &cfg).is_err());
        let c = [ModScheme::Fm.into()];
        assert!(generate_dataset(&c, 0, 1, 64, &SnrPolicy::Noiseless, &cfg).is_err());
        assert!(generate_dataset(&c, 1, 1, 64, &SnrPolicy::Uniform(vec![]), &cfg).is_err());
    }
}
