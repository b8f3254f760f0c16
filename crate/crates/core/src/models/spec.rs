use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::CtConfig;

/// One layer of a sequential network. Parameterized layers own their
/// weights and biases in the order they appear here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// `[C,L]` → `[O,L']`, weights `[O,C,k]`.
    Conv1d { c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize },
    /// `[C,H,W]` → `[O,H',W']`, weights `[O,C,k,k]`.
    Conv2d { c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize },
    Relu,
    MaxPool1d { size: usize },
    MaxPool2d { pool_h: usize, pool_w: usize },
    /// `[2,N]` → `[2,F,N/4]`.
    ConvTransform(CtConfig),
    /// `body(x) + skip(x)` where `skip` is the identity or a strided 1×1
    /// convolution when `projection` is set.
    Residual { body: Vec<LayerSpec>, projection: Option<Projection> },
    GlobalAvgPool,
    Flatten,
    Dense { d_in: usize, d_out: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
}

/// A parameter tensor a spec requires, in creation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
    /// Inputs feeding each output; zero marks a bias.
    pub fan_in: usize,
    /// Outputs each input feeds.
    pub fan_out: usize,
    pub trainable: bool,
    /// Last weight of a residual body.
    pub residual_out: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// Per-sample input shape, without the batch axis.
    pub input_shape: Vec<usize>,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

fn conv_out(len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return Err(Error::shape(format!(
            "kernel {kernel} with stride {stride}, padding {padding} does not fit length {len}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

impl LayerSpec {
    /// Output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |what: &str| Error::shape(format!("{what} cannot take input {input:?}"));
        match *self {
            LayerSpec::Conv1d { c_in, c_out, kernel, stride, padding } => match *input {
                [c, l] if c == c_in => Ok(vec![c_out, conv_out(l, kernel, stride, padding)?]),
                _ => Err(mismatch(&format!("conv1d with {c_in} input channels"))),
            },
            LayerSpec::Conv2d { c_in, c_out, kernel, stride, padding } => match *input {
                [c, h, w] if c == c_in => {
                    Ok(vec![c_out, conv_out(h, kernel, stride, padding)?, conv_out(w, kernel, stride, padding)?])
                }
                _ => Err(mismatch(&format!("conv2d with {c_in} input channels"))),
            },
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool1d { size } => match *input {
                [c, l] if size > 0 && l % size == 0 => Ok(vec![c, l / size]),
                _ => Err(mismatch(&format!("max pool of size {size}"))),
            },
            LayerSpec::MaxPool2d { pool_h, pool_w } => match *input {
                [c, h, w] if pool_h > 0 && pool_w > 0 && h % pool_h == 0 && w % pool_w == 0 => {
                    Ok(vec![c, h / pool_h, w / pool_w])
                }
                _ => Err(mismatch(&format!("{pool_h}x{pool_w} max pool"))),
            },
            LayerSpec::ConvTransform(cfg) => match *input {
                [2, n] => Ok(cfg.output_shape(n)?.to_vec()),
                _ => Err(mismatch("convolutional transform")),
            },
            LayerSpec::Residual { ref body, projection } => {
                let mut shape = input.to_vec();
                for l in body {
                    shape = l.output_shape(&shape)?;
                }
                let skip = match projection {
                    None => input.to_vec(),
                    Some(p) => LayerSpec::Conv2d { c_in: p.c_in, c_out: p.c_out, kernel: 1, stride: p.stride, padding: 0 }
                        .output_shape(input)?,
                };
                if skip != shape {
                    return Err(Error::shape(format!(
                        "residual body produces {shape:?} but the skip path produces {skip:?}"
                    )));
                }
                Ok(shape)
            }
            LayerSpec::GlobalAvgPool => match *input {
                [c, _, _] => Ok(vec![c]),
                _ => Err(mismatch("global average pool")),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { d_in, d_out } => match *input {
                [d] if d == d_in => Ok(vec![d_out]),
                _ => Err(mismatch(&format!("dense layer with {d_in} inputs"))),
            },
        }
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<ParamShape>) {
        let mut push = |suffix: &str, shape: Vec<usize>, fan_in: usize, trainable: bool| {
            let fan_out = if fan_in == 0 { 0 } else { shape[0] * shape[2..].iter().product::<usize>() };
            out.push(ParamShape { name: format!("{prefix}.{suffix}"), shape, fan_in, fan_out, trainable, residual_out: false })
        };
        match *self {
            LayerSpec::Conv1d { c_in, c_out, kernel, .. } => {
                push("weight", vec![c_out, c_in, kernel], c_in * kernel, true);
                push("bias", vec![c_out], 0, true);
            }
            LayerSpec::Conv2d { c_in, c_out, kernel, .. } => {
                push("weight", vec![c_out, c_in, kernel, kernel], c_in * kernel * kernel, true);
                push("bias", vec![c_out], 0, true);
            }
            LayerSpec::ConvTransform(cfg) => {
                push("weight", cfg.weight_shape().to_vec(), cfg.kernel.0 * cfg.kernel.1, cfg.learnable);
                push("bias", vec![cfg.filters], 0, cfg.learnable);
            }
            LayerSpec::Dense { d_in, d_out } => {
                push("weight", vec![d_out, d_in], d_in, true);
                push("bias", vec![d_out], 0, true);
            }
            LayerSpec::Residual { ref body, projection } => {
                let start = out.len();
                for (i, l) in body.iter().enumerate() {
                    l.collect_params(&format!("{prefix}.{i}"), out);
                }
                if let Some(w) = out[start..].iter_mut().rev().find(|p| p.fan_in > 0) {
                    w.residual_out = true;
                }
                if let Some(p) = projection {
                    out.push(ParamShape {
                        name: format!("{prefix}.skip.weight"),
                        shape: vec![p.c_out, p.c_in, 1, 1],
                        fan_in: p.c_in,
                        fan_out: p.c_out,
                        trainable: true,
                        residual_out: false,
                    });
                    out.push(ParamShape { name: format!("{prefix}.skip.bias"), shape: vec![p.c_out], fan_in: 0, fan_out: 0, trainable: true, residual_out: false });
                }
            }
            LayerSpec::Relu
            | LayerSpec::MaxPool1d { .. }
            | LayerSpec::MaxPool2d { .. }
            | LayerSpec::GlobalAvgPool
            | LayerSpec::Flatten => {}
        }
    }

    /// Closed-form trainable-or-not scalar count.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { c_in, c_out, kernel, .. } => c_in * c_out * kernel + c_out,
            LayerSpec::Conv2d { c_in, c_out, kernel, .. } => c_in * c_out * kernel * kernel + c_out,
            LayerSpec::ConvTransform(cfg) => cfg.filters * cfg.kernel.0 * cfg.kernel.1 + cfg.filters,
            LayerSpec::Dense { d_in, d_out } => d_in * d_out + d_out,
            LayerSpec::Residual { ref body, projection } => {
                body.iter().map(LayerSpec::param_count).sum::<usize>() + projection.map_or(0, |p| p.c_in * p.c_out + p.c_out)
            }
            _ => 0,
        }
    }
}

impl ModelSpec {
    /// Check that every layer accepts its predecessor's output and the
    /// network ends in `n_classes` logits. Returns the per-layer output
    /// shapes.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        if self.n_classes < 2 {
            return Err(Error::invalid(format!("a classifier needs at least 2 classes, got {}", self.n_classes)));
        }
        let mut shape = self.input_shape.clone();
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.output_shape(&shape).map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
            shapes.push(shape.clone());
        }
        if shape != [self.n_classes] {
            return Err(Error::shape(format!(
                "network ends in shape {shape:?}, expected [{}] logits",
                self.n_classes
            )));
        }
        Ok(shapes)
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.collect_params(&format!("layers.{i}"), &mut out);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }
}
