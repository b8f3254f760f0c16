//! Central-difference verification of analytic gradients (64-bit only).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::models::Model;
use crate::tensor::Tensor;

/// Which coordinates of each checked tensor get perturbed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Full,
    /// At most `per_tensor` coordinates per tensor, drawn without
    /// replacement from `seed`.
    Sampled { per_tensor: usize, seed: u64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(|analytic|, |numeric|, 1e−8)
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose ±h perturbation crossed a ReLU or pooling kink even
    /// after shrinking h; excluded from `max_rel_err`.
    pub skipped_kinks: usize,
    /// `(tensor, element)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_err < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Number of times the step is divided by 10 when a kink is crossed.
const KINK_RETRIES: usize = 2;

/// Compare the tape gradient of a scalar built by `build` against central
/// differences with step `perturbation`, for every leaf in `tensors`.
///
/// `build` receives the leaves (in the order of `tensors`) and returns the
/// scalar to differentiate.
pub fn grad_check<F>(
    tensors: &[Tensor<f64>],
    perturbation: f64,
    coverage: Coverage,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |ts: &[Tensor<f64>]| -> Result<(f64, u64)> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = ts.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &leaves)?;
        Ok((tape.value(loss).item(), tape.kink_signature()))
    };

    let mut tape = Tape::new();
    let leaves: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &leaves)?;
    let base_sig = tape.kink_signature();
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = leaves
        .iter()
        .zip(tensors)
        .map(|(&v, t)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut report = GradCheckReport::default();
    let mut work = tensors.to_vec();
    for (ti, t) in tensors.iter().enumerate() {
        let coords: Vec<usize> = match coverage {
            Coverage::Full => (0..t.numel()).collect(),
            Coverage::Sampled { per_tensor, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ti as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut v = index::sample(&mut rng, t.numel(), per_tensor.min(t.numel())).into_vec();
                v.sort_unstable();
                v
            }
        };
        for ci in coords {
            let orig = t.data()[ci];
            let mut h = perturbation;
            let mut numeric = None;
            for _ in 0..=KINK_RETRIES {
                work[ti].data_mut()[ci] = orig + h;
                let (plus, sig_p) = eval(&work)?;
                work[ti].data_mut()[ci] = orig - h;
                let (minus, sig_m) = eval(&work)?;
                work[ti].data_mut()[ci] = orig;
                if sig_p == base_sig && sig_m == base_sig {
                    numeric = Some((plus - minus) / (2.0 * h));
                    break;
                }
                h /= 10.0;
            }
            let Some(numeric) = numeric else {
                report.skipped_kinks += 1;
                continue;
            };
            let err = relative_error(analytic[ti].data()[ci], numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((ti, ci));
            }
        }
    }
    Ok(report)
}

/// Check every parameter of `model` and the input batch `x`. The scalar is
/// a fixed random projection of the logits, which keeps the network
/// piecewise linear so central differences are exact away from kinks.
pub fn grad_check_model(
    model: &Model<f64>,
    x: &Tensor<f64>,
    perturbation: f64,
    coverage: Coverage,
    seed: u64,
) -> Result<GradCheckReport> {
    model.check_input(x.shape())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = Tensor::from_fn(&[x.shape()[0], model.spec.n_classes], |_| rng.random_range(-1.0..1.0));
    let mut tensors: Vec<Tensor<f64>> = model.params.iter().map(|p| p.value.clone()).collect();
    tensors.push(x.clone());
    let n = model.params.len();
    grad_check(&tensors, perturbation, coverage, |tape, v| {
        let logits = model.forward(tape, v[n], &v[..n])?;
        tape.project(logits, proj.clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let x = Tensor::from_fn(&[2, 5], |i| (i as f64 * 0.37).sin());
        let w = Tensor::from_fn(&[3, 5], |i| (i as f64 * 0.11).cos());
        let b = Tensor::from_fn(&[3], |i| i as f64);
        let proj = Tensor::from_fn(&[2, 3], |i| 1.0 - 0.3 * i as f64);
        for h in [1e-3, 1e-1, 1.0] {
            let r = grad_check(&[x.clone(), w.clone(), b.clone()], h, Coverage::Full, |tape, v| {
                let y = tape.dense(v[0], v[1], v[2])?;
                tape.project(y, proj.clone())
            })
            .unwrap();
            assert_eq!(r.checked, 10 + 15 + 3);
            assert!(r.max_rel_err < 1e-10, "h={h}: {r:?}");
        }
    }

    #[test]
    fn relative_error_floor() {
        assert!(relative_error(1.0, 1.1) > 0.09);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 0.0) < 1e-3);
    }
}
