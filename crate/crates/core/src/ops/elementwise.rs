//! Shape-preserving and reshaping ops: ReLU, addition, axis swaps, and
//! global average pooling.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where the input was strictly positive; zero at 0.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(format!(
            "relu upstream gradient {:?} does not match input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("cannot add {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

/// Swap axes 1 and 2 of a rank-4 tensor: `[B,P,Q,R] → [B,Q,P,R]`.
pub fn swap_inner_axes<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let &[b, p, q, r] = input.shape() else {
        return Err(Error::shape(format!("axis swap expects rank 4, got {:?}", input.shape())));
    };
    let x = input.data();
    let mut out = vec![T::zero(); x.len()];
    for s in 0..b {
        let base = s * p * q * r;
        for i in 0..p {
            for j in 0..q {
                let src = base + (i * q + j) * r;
                let dst = base + (j * p + i) * r;
                out[dst..dst + r].copy_from_slice(&x[src..src + r]);
            }
        }
    }
    Tensor::new(&[b, q, p, r], out)
}

/// Mean over the trailing `H×W` plane: `[B,C,H,W] → [B,C]`.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let &[b, c, h, w] = input.shape() else {
        return Err(Error::shape(format!("global pool expects [B,C,H,W], got {:?}", input.shape())));
    };
    let scale = T::from_f64(1.0 / (h * w) as f64);
    let data = input
        .data()
        .chunks_exact(h * w)
        .map(|plane| plane.iter().fold(T::zero(), |a, &v| a + v) * scale)
        .collect();
    Tensor::new(&[b, c], data)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let &[b, c, h, w] = input_shape else {
        return Err(Error::shape(format!("global pool expects [B,C,H,W], got {input_shape:?}")));
    };
    if grad_out.shape() != [b, c] {
        return Err(Error::shape(format!(
            "global pool upstream gradient {:?} does not match [{b}, {c}]",
            grad_out.shape()
        )));
    }
    let scale = T::from_f64(1.0 / (h * w) as f64);
    let mut dx = Vec::with_capacity(b * c * h * w);
    for &g in grad_out.data() {
        dx.extend(std::iter::repeat_n(g * scale, h * w));
    }
    Tensor::new(input_shape, dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives_and_zero_gradient_at_zero() {
        let x = Tensor::<f32>::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::full(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn swap_is_an_involution() {
        let x = Tensor::<f32>::from_fn(&[2, 3, 4, 5], |i| i as f32);
        let y = swap_inner_axes(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4, 3, 5]);
        assert_eq!(y.get(&[1, 2, 0, 3]), x.get(&[1, 0, 2, 3]));
        assert_eq!(swap_inner_axes(&y).unwrap(), x);
    }
}
