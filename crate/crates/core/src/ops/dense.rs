//! Fully connected layer: `y = x·Wᵀ + b`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn batch_dims(input: &[usize], weights: &[usize]) -> Result<(usize, usize, usize)> {
    let (batch, d_in) = match input {
        [d] => (1, *d),
        [b, d] => (*b, *d),
        _ => return Err(Error::shape(format!("dense input must be [D] or [B,D], got {input:?}"))),
    };
    match weights {
        [o, d] if *d == d_in => Ok((batch, d_in, *o)),
        _ => Err(Error::shape(format!(
            "dense weights {weights:?} do not accept input {input:?}"
        ))),
    }
}

pub fn dense<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, d_in, d_out) = batch_dims(input.shape(), weights.shape())?;
    if bias.shape() != [d_out] {
        return Err(Error::shape(format!(
            "dense bias {:?} does not match {d_out} outputs",
            bias.shape()
        )));
    }
    let mut y = vec![T::zero(); batch * d_out];
    for row in y.chunks_exact_mut(d_out) {
        row.copy_from_slice(bias.data());
    }
    T::gemm(batch, d_in, d_out, input.data(), false, weights.data(), true, &mut y, true);
    let shape = if input.rank() == 1 { vec![d_out] } else { vec![batch, d_out] };
    Tensor::new(&shape, y)
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (batch, d_in, d_out) = batch_dims(input.shape(), weights.shape())?;
    if grad_out.numel() != batch * d_out {
        return Err(Error::shape(format!(
            "upstream gradient {:?} does not match dense output [{batch}, {d_out}]",
            grad_out.shape()
        )));
    }
    let dy = grad_out.data();
    let mut dx = vec![T::zero(); batch * d_in];
    T::gemm(batch, d_out, d_in, dy, false, weights.data(), false, &mut dx, false);
    let mut dw = vec![T::zero(); d_out * d_in];
    T::gemm(d_out, batch, d_in, dy, true, input.data(), false, &mut dw, false);
    let mut db = vec![T::zero(); d_out];
    for row in dy.chunks_exact(d_out) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok((
        Tensor::new(input.shape(), dx)?,
        Tensor::new(weights.shape(), dw)?,
        Tensor::new(&[d_out], db)?,
    ))
}
