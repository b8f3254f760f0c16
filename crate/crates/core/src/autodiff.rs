//! Reverse-mode differentiation over a linear tape of op nodes, plus the
//! trainable-parameter container and the SGD update.

use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::{Error, Result};
use crate::ops::{self, ConvGeometry};
use crate::tensor::{Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What produced a tape entry, with whatever the backward pass needs beyond
/// the input values themselves.
#[derive(Clone, Debug)]
pub enum OpNode<T> {
    Leaf,
    Conv { input: Var, weights: Var, bias: Var, geom: ConvGeometry },
    MaxPool { input: Var, argmax: Vec<usize> },
    Dense { input: Var, weights: Var, bias: Var },
    Relu { input: Var },
    Add { a: Var, b: Var },
    Reshape { input: Var },
    SwapAxes { input: Var },
    GlobalAvgPool { input: Var },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Tensor<T> },
    /// `Σ input ⊙ weights`, a fixed random projection to a scalar.
    Project { input: Var, weights: Tensor<T> },
}

struct Entry<T> {
    value: Tensor<T>,
    op: OpNode<T>,
}

/// Records a forward computation. `backward` consumes the tape, so each
/// forward pass is differentiated at most once.
pub struct Tape<T: Scalar> {
    entries: Vec<Entry<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: OpNode<T>) -> Var {
        self.entries.push(Entry { value, op });
        Var(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.entries[v.0].value
    }

    pub fn op(&self, v: Var) -> &OpNode<T> {
        &self.entries[v.0].op
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, OpNode::Leaf)
    }

    /// Batched convolution of `[B,C,H,W]` with `[O,C,kh,kw]` weights.
    pub fn conv(&mut self, input: Var, weights: Var, bias: Var, geom: ConvGeometry) -> Result<Var> {
        let y = ops::conv2d_geom(self.value(input), self.value(weights), self.value(bias), geom)?;
        Ok(self.push(y, OpNode::Conv { input, weights, bias, geom }))
    }

    /// Square-kernel 2-D convolution on `[B,C,H,W]`.
    pub fn conv2d(&mut self, input: Var, weights: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let k = self.value(weights).shape().get(2).copied().unwrap_or(0);
        self.conv(input, weights, bias, ConvGeometry::square(k, stride, padding))
    }

    /// Temporal convolution of `[B,C,L]` with `[O,C,k]` weights.
    pub fn conv1d(&mut self, input: Var, weights: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weights).shape().to_vec();
        let (&[b, c, l], &[o, wc, k]) = (xs.as_slice(), ws.as_slice()) else {
            return Err(Error::shape(format!(
                "conv1d expects input [B,C,L] and weights [O,C,k], got {xs:?} and {ws:?}"
            )));
        };
        let x4 = self.reshape(input, &[b, c, 1, l])?;
        let w4 = self.reshape(weights, &[o, wc, 1, k])?;
        let y = self.conv(x4, w4, bias, ConvGeometry::temporal(k, stride, padding))?;
        let ys = self.value(y).shape().to_vec();
        self.reshape(y, &[ys[0], ys[1], ys[3]])
    }

    /// Max pool over the trailing two axes.
    pub fn maxpool2d(&mut self, input: Var, pool_h: usize, pool_w: usize) -> Result<Var> {
        let p = ops::maxpool2d(self.value(input), pool_h, pool_w)?;
        Ok(self.push(p.output, OpNode::MaxPool { input, argmax: p.argmax }))
    }

    /// Max pool along the last axis of `[B,C,L]`.
    pub fn maxpool1d(&mut self, input: Var, size: usize) -> Result<Var> {
        self.maxpool2d(input, 1, size)
    }

    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let y = ops::dense(self.value(input), self.value(weights), self.value(bias))?;
        Ok(self.push(y, OpNode::Dense { input, weights, bias }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let y = ops::relu(self.value(input));
        self.push(y, OpNode::Relu { input })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(y, OpNode::Add { a, b }))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(input).clone().reshape(shape)?;
        Ok(self.push(y, OpNode::Reshape { input }))
    }

    /// Collapse everything after the batch axis.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape();
        let shape = [s[0], s[1..].iter().product()];
        self.reshape(input, &shape)
    }

    /// `[B,P,Q,R] → [B,Q,P,R]`.
    pub fn swap_axes(&mut self, input: Var) -> Result<Var> {
        let y = ops::swap_inner_axes(self.value(input))?;
        Ok(self.push(y, OpNode::SwapAxes { input }))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let y = ops::global_avg_pool(self.value(input))?;
        Ok(self.push(y, OpNode::GlobalAvgPool { input }))
    }

    /// Mean softmax cross-entropy of `[B,K]` logits; the result is a
    /// one-element tensor.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let ce = ops::softmax_cross_entropy(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(ce.loss),
            OpNode::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs: ce.probs },
        ))
    }

    pub fn project(&mut self, input: Var, weights: Tensor<T>) -> Result<Var> {
        let x = self.value(input);
        if x.shape() != weights.shape() {
            return Err(Error::shape(format!(
                "projection weights {:?} do not match {:?}",
                weights.shape(),
                x.shape()
            )));
        }
        let s = x.data().iter().zip(weights.data()).fold(T::zero(), |a, (&x, &w)| a + x * w);
        Ok(self.push(Tensor::scalar(s), OpNode::Project { input, weights }))
    }

    /// Hash of every ReLU sign pattern and max-pool winner on the tape.
    /// Two forwards with equal signatures lie on the same linear piece of
    /// the network, so central differences between them are kink-free.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for e in &self.entries {
            match &e.op {
                OpNode::Relu { input } => {
                    for chunk in self.value(*input).data().chunks(64) {
                        let bits = chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (i, &v)| acc | (u64::from(v > T::zero()) << i));
                        bits.hash(&mut h);
                    }
                }
                OpNode::MaxPool { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Differentiate the one-element `loss` with respect to every entry.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut entries: Vec<Option<Entry<T>>> = self.entries.into_iter().map(Some).collect();
        let mut grads: Vec<Option<Tensor<T>>> = (0..entries.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if matches!(entries[idx].as_ref().map(|e| &e.op), Some(OpNode::Leaf)) {
                // Leaves keep their gradient for the caller.
                grads[idx] = Some(g);
                continue;
            }
            let entry = entries[idx].take().expect("tape entry visited twice");
            let val = |v: Var| -> &Tensor<T> {
                &entries[v.0].as_ref().expect("input recorded after its consumer").value
            };
            match &entry.op {
                OpNode::Leaf => unreachable!(),
                OpNode::Conv { input, weights, bias, geom } => {
                    let (dx, dw, db) = ops::conv2d_geom_backward(val(*input), val(*weights), &g, *geom)?;
                    accumulate(&mut grads, *input, dx);
                    accumulate(&mut grads, *weights, dw);
                    accumulate(&mut grads, *bias, db);
                }
                OpNode::MaxPool { input, argmax } => {
                    let dx = ops::maxpool2d_backward(val(*input).shape(), argmax, &g)?;
                    accumulate(&mut grads, *input, dx);
                }
                OpNode::Dense { input, weights, bias } => {
                    let (dx, dw, db) = ops::dense_backward(val(*input), val(*weights), &g)?;
                    accumulate(&mut grads, *input, dx);
                    accumulate(&mut grads, *weights, dw);
                    accumulate(&mut grads, *bias, db);
                }
                OpNode::Relu { input } => {
                    let dx = ops::relu_backward(val(*input), &g)?;
                    accumulate(&mut grads, *input, dx);
                }
                OpNode::Add { a, b } => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                OpNode::Reshape { input } => {
                    let dx = g.reshape(val(*input).shape())?;
                    accumulate(&mut grads, *input, dx);
                }
                OpNode::SwapAxes { input } => {
                    accumulate(&mut grads, *input, ops::swap_inner_axes(&g)?);
                }
                OpNode::GlobalAvgPool { input } => {
                    let dx = ops::global_avg_pool_backward(val(*input).shape(), &g)?;
                    accumulate(&mut grads, *input, dx);
                }
                OpNode::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let dx = ops::softmax_cross_entropy_backward(probs, labels, g.item());
                    accumulate(&mut grads, *logits, dx);
                }
                OpNode::Project { input, weights } => {
                    accumulate(&mut grads, *input, weights.map(|w| w * g.item()));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of a scalar with respect to the leaves of a tape.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// A trainable tensor θᵢ and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T: Scalar = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { name: name.into(), value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Ordered collection of the parameters of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T: Scalar = f32> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self { params: Vec::new() }
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) -> usize {
        self.params.push(Parameter::new(name, value));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Parameter<T>> {
        self.params.iter()
    }

    pub fn as_slice(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    pub fn get(&self, i: usize) -> &Parameter<T> {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Parameter<T> {
        &mut self.params[i]
    }

    /// Record every parameter value as a tape leaf, in order.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone())).collect()
    }

    /// Add the gradients of the bound leaves into each `grad`.
    pub fn accumulate(&mut self, grads: &Gradients<T>, vars: &[Var]) {
        assert_eq!(vars.len(), self.params.len(), "bound variables do not match parameters");
        for (p, &v) in self.params.iter_mut().zip(vars) {
            if let Some(g) = grads.get(v) {
                p.grad.add_assign(g);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Parameter { name: p.name.clone(), value: p.value.cast(), grad: p.grad.cast() })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }
}

/// Plain gradient descent: `value ← value − lr·grad`. Gradients are left in
/// place; call `zero_grad` before the next accumulation.
pub fn sgd_step<T: Scalar>(params: &mut [Parameter<T>], lr: T) {
    for p in params {
        for (v, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
            *v -= lr * g;
        }
    }
}
