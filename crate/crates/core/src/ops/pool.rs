//! Non-overlapping max pooling over the last two axes.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Output of a max pool: the pooled tensor and, for each output element,
/// the flat index of the input element that produced it.
#[derive(Clone, Debug)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Max pool a `[..., H, W]` tensor with a `pool_h × pool_w` window and equal
/// stride. Ties resolve to the first element in row-major window order.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, pool_h: usize, pool_w: usize) -> Result<Pooled<T>> {
    let shape = input.shape();
    if shape.len() < 2 {
        return Err(Error::shape(format!("maxpool needs at least 2 axes, got {shape:?}")));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if pool_h == 0 || pool_w == 0 || h % pool_h != 0 || w % pool_w != 0 {
        return Err(Error::shape(format!(
            "pool window {pool_h}x{pool_w} does not tile the {h}x{w} plane of {shape:?}"
        )));
    }
    let (oh, ow) = (h / pool_h, w / pool_w);
    let planes = input.numel() / (h * w);
    let x = input.data();
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * pool_h * w + ox * pool_w;
                let mut best_v = x[best];
                for i in 0..pool_h {
                    let row = base + (oy * pool_h + i) * w + ox * pool_w;
                    for (j, &v) in x[row..row + pool_w].iter().enumerate() {
                        if v > best_v {
                            best_v = v;
                            best = row + j;
                        }
                    }
                }
                out.push(best_v);
                argmax.push(best);
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let n = out_shape.len();
    out_shape[n - 2] = oh;
    out_shape[n - 1] = ow;
    Ok(Pooled { output: Tensor::new(&out_shape, out)?, argmax })
}

/// Route each upstream gradient to the input position that won the max.
pub fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if grad_out.numel() != argmax.len() {
        return Err(Error::shape(format!(
            "upstream gradient {:?} does not match {} pooled elements",
            grad_out.shape(),
            argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        d[idx] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ct_pool_geometry() {
        let x = Tensor::<f32>::zeros(&[2, 256, 1024]);
        let p = maxpool2d(&x, 1, 4).unwrap();
        assert_eq!(p.output.shape(), &[2, 256, 256]);
    }

    #[test]
    fn constant_input_stays_constant() {
        let x = Tensor::<f32>::full(&[3, 4, 8], 2.5);
        let p = maxpool2d(&x, 2, 4).unwrap();
        assert!(p.output.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn ties_route_to_first_occurrence() {
        let x = Tensor::<f64>::new(&[1, 1, 4], vec![1.0, 3.0, 3.0, 0.0]).unwrap();
        let p = maxpool2d(&x, 1, 4).unwrap();
        assert_eq!(p.argmax, vec![1]);
        let g = maxpool2d_backward(x.shape(), &p.argmax, &Tensor::scalar(1.0).reshape(&[1, 1, 1]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_non_divisible_plane() {
        let x = Tensor::<f32>::zeros(&[1, 2, 10]);
        let err = maxpool2d(&x, 1, 4).unwrap_err();
        assert!(err.to_string().contains("2x10"));
    }
}
