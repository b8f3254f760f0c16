//! Softmax cross-entropy with max-subtraction stabilization.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean cross-entropy loss together with the row softmax it was computed
/// from (kept for the backward pass).
#[derive(Clone, Debug)]
pub struct CrossEntropy<T> {
    pub loss: T,
    pub probs: Tensor<T>,
}

pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<CrossEntropy<T>> {
    let &[batch, k] = logits.shape() else {
        return Err(Error::shape(format!("logits must be [B,K], got {:?}", logits.shape())));
    };
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {k}")));
    }
    if labels.len() != batch {
        return Err(Error::shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    let mut probs = Vec::with_capacity(batch * k);
    let mut total = 0.0f64;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let start = probs.len();
        let mut sum = T::zero();
        for &z in row {
            let e = (z - max).exp();
            probs.push(e);
            sum += e;
        }
        for p in &mut probs[start..] {
            *p = *p / sum;
        }
        total += (sum.ln() + max - row[label]).as_f64();
    }
    Ok(CrossEntropy {
        loss: T::from_f64(total / batch as f64),
        probs: Tensor::new(&[batch, k], probs)?,
    })
}

/// `(softmax − one_hot) / B`, scaled by the upstream gradient of the loss.
pub fn softmax_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    labels: &[usize],
    grad_loss: T,
) -> Tensor<T> {
    let &[batch, k] = probs.shape() else { panic!("probs must be [B,K]") };
    let scale = grad_loss / T::from_f64(batch as f64);
    let mut grad = probs.clone();
    for (row, &label) in grad.data_mut().chunks_exact_mut(k).zip(labels) {
        row[label] -= T::one();
        row.iter_mut().for_each(|g| *g *= scale);
    }
    grad
}
