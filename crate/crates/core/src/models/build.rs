use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{LayerSpec, ModelSpec, Projection};
use super::argmax;
use crate::autodiff::{sgd_step, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::ops::ConvGeometry;
use crate::tensor::{Scalar, Tensor};
use crate::transforms::{conv_transform_tape, CtConfig};

pub const CONV5_DEFAULT_WIDTHS: [usize; 5] = [64, 64, 128, 128, 256];

/// Trainable parameter total the original CONV-5 reports.
pub const PAPER_CONV5_PARAMS: usize = 5_067_019;

const IMAGE_SIZES: [usize; 4] = [28, 32, 224, 256];

/// Weight initialization. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in ±sqrt(6/fan_in). Diverges under plain SGD at lr 0.1 on
    /// both model families, even on separable toy data.
    HeUniform,
    /// Uniform in ±sqrt(3/fan_in).
    #[default]
    LecunUniform,
    /// Uniform in ±1/sqrt(fan_in).
    Uniform,
    /// Uniform in ±sqrt(6/(fan_in + fan_out)).
    GlorotUniform,
}

impl Init {
    pub fn bound(self, fan_in: usize, fan_out: usize) -> f64 {
        let f = fan_in as f64;
        match self {
            Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            Init::HeUniform => (6.0 / f).sqrt(),
            Init::LecunUniform => (3.0 / f).sqrt(),
            Init::Uniform => 1.0 / f.sqrt(),
        }
    }
}

/// A validated spec with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar = f32> {
    pub spec: ModelSpec,
    pub params: ParamSet<T>,
    trainable: Vec<bool>,
}

impl<T: Scalar> Model<T> {
    /// Validate `spec` and initialize with [`Init::default`].
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        Self::with_init(spec, seed, Init::default())
    }

    /// Validate `spec` and draw weights from a single seeded stream in
    /// parameter order.
    /// The last weight of every residual body starts at zero, so each block
    /// begins as its skip path. Without normalization layers this keeps
    /// early activations from compounding through the stack.
    pub fn with_init(spec: ModelSpec, seed: u64, init: Init) -> Result<Self> {
        Self::initialize(spec, seed, init, true)
    }

    /// [`Model::with_init`], optionally drawing residual output weights
    /// like any other. Gradient checks want every path live.
    pub fn initialize(spec: ModelSpec, seed: u64, init: Init, zero_residual: bool) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let mut trainable = Vec::new();
        for p in spec.param_shapes() {
            let value = if p.fan_in == 0 {
                Tensor::zeros(&p.shape)
            } else {
                let bound = init.bound(p.fan_in, p.fan_out);
                let w = Tensor::from_fn(&p.shape, |_| T::from_f64(rng.random_range(-bound..bound)));
                if zero_residual && p.residual_out {
                    Tensor::zeros(&p.shape)
                } else {
                    w
                }
            };
            params.push(p.name, value);
            trainable.push(p.trainable);
        }
        Ok(Self { spec, params, trainable })
    }

    /// Wrap existing parameters, checking names and shapes against the spec.
    pub fn from_parts(spec: ModelSpec, params: ParamSet<T>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.param_shapes();
        if expected.len() != params.len() {
            return Err(Error::shape(format!(
                "spec needs {} parameter tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (e, p) in expected.iter().zip(params.iter()) {
            if e.name != p.name || e.shape != p.value.shape() {
                return Err(Error::shape(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    p.name,
                    p.value.shape(),
                    e.name,
                    e.shape
                )));
            }
        }
        let trainable = expected.iter().map(|e| e.trainable).collect();
        Ok(Self { spec, params, trainable })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model { spec: self.spec.clone(), params: self.params.cast(), trainable: self.trainable.clone() }
    }

    pub fn is_trainable(&self, i: usize) -> bool {
        self.trainable[i]
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Reject batches whose per-sample shape differs from the model input.
    pub fn check_input(&self, batch_shape: &[usize]) -> Result<()> {
        if batch_shape.len() != self.spec.input_shape.len() + 1 || batch_shape[1..] != self.spec.input_shape[..] {
            return Err(Error::shape(format!(
                "batch {batch_shape:?} does not match model input [B, {}]",
                self.spec.input_shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(())
    }

    /// Record the network on `tape`; `vars` are the bound parameters.
    pub fn forward(&self, tape: &mut Tape<T>, x: Var, vars: &[Var]) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let mut cursor = 0;
        let mut h = x;
        for layer in &self.spec.layers {
            h = apply(tape, layer, h, vars, &mut cursor)?;
        }
        debug_assert_eq!(cursor, vars.len());
        Ok(h)
    }

    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch.shape())?;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let x = tape.leaf(batch.clone());
        let y = self.forward(&mut tape, x, &vars)?;
        Ok(tape.value(y).clone())
    }

    /// Logits and argmax labels (ties resolve to the lowest class).
    pub fn predict(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let logits = self.logits(batch)?;
        let k = self.spec.n_classes;
        let labels = logits.data().chunks_exact(k).map(argmax).collect();
        Ok((logits, labels))
    }

    /// Mean cross-entropy on one batch; gradients are added to each
    /// parameter's `grad`. Returns the loss and the logits.
    pub fn loss_and_grad(&mut self, batch: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
        self.check_input(batch.shape())?;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let x = tape.leaf(batch.clone());
        let logits = self.forward(&mut tape, x, &vars)?;
        let loss = tape.softmax_cross_entropy(logits, labels)?;
        let value = tape.value(loss).item().as_f64();
        let out = tape.value(logits).clone();
        let grads = tape.backward(loss)?;
        self.params.accumulate(&grads, &vars);
        Ok((value, out))
    }

    /// SGD on trainable parameters only.
    pub fn sgd_step(&mut self, lr: T) {
        for (i, p) in self.params.as_mut_slice().iter_mut().enumerate() {
            if self.trainable[i] {
                sgd_step(std::slice::from_mut(p), lr);
            }
        }
    }
}

fn apply<T: Scalar>(tape: &mut Tape<T>, layer: &LayerSpec, x: Var, vars: &[Var], cursor: &mut usize) -> Result<Var> {
    let mut next = || {
        let v = vars[*cursor];
        *cursor += 1;
        v
    };
    match *layer {
        LayerSpec::Conv1d { stride, padding, .. } => {
            let (w, b) = (next(), next());
            tape.conv1d(x, w, b, stride, padding)
        }
        LayerSpec::Conv2d { stride, padding, .. } => {
            let (w, b) = (next(), next());
            tape.conv2d(x, w, b, stride, padding)
        }
        LayerSpec::Relu => Ok(tape.relu(x)),
        LayerSpec::MaxPool1d { size } => tape.maxpool1d(x, size),
        LayerSpec::MaxPool2d { pool_h, pool_w } => tape.maxpool2d(x, pool_h, pool_w),
        LayerSpec::ConvTransform(ref cfg) => {
            let (w, b) = (next(), next());
            conv_transform_tape(tape, x, w, b, cfg)
        }
        LayerSpec::Residual { ref body, projection } => {
            let mut h = x;
            for l in body {
                h = apply(tape, l, h, vars, cursor)?;
            }
            let skip = match projection {
                None => x,
                Some(p) => {
                    let w = vars[*cursor];
                    let b = vars[*cursor + 1];
                    *cursor += 2;
                    tape.conv(x, w, b, ConvGeometry::square(1, p.stride, 0))?
                }
            };
            tape.add(h, skip)
        }
        LayerSpec::GlobalAvgPool => tape.global_avg_pool(x),
        LayerSpec::Flatten => tape.flatten(x),
        LayerSpec::Dense { .. } => {
            let (w, b) = (next(), next());
            tape.dense(x, w, b)
        }
    }
}

/// Five temporal conv layers (kernel 3, stride 1, padding 1), each followed
/// by ReLU and a factor-2 max pool, then a dense head.
pub fn conv5_spec(n: usize, n_classes: usize, widths: [usize; 5]) -> Result<ModelSpec> {
    if n == 0 || n % 32 != 0 {
        return Err(Error::shape(format!("CONV-5 needs a frame length divisible by 32, got {n}")));
    }
    let mut layers = Vec::new();
    let mut c_in = 2;
    for &c_out in &widths {
        layers.push(LayerSpec::Conv1d { c_in, c_out, kernel: 3, stride: 1, padding: 1 });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::MaxPool1d { size: 2 });
        c_in = c_out;
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense { d_in: c_in * n / 32, d_out: n_classes });
    let spec = ModelSpec { name: "conv5".into(), input_shape: vec![2, n], n_classes, layers };
    spec.validate()?;
    Ok(spec)
}

pub fn build_conv5<T: Scalar>(n: usize, n_classes: usize, widths: [usize; 5], seed: u64) -> Result<Model<T>> {
    Model::new(conv5_spec(n, n_classes, widths)?, seed)
}

/// Pre-activation residual trunk: stem conv, three stages of two blocks,
/// stride-2 downsampling at the start of stages two and three, then ReLU,
/// global average pooling and a dense head.
pub(crate) fn residual_layers(c_in: usize, size: usize, n_classes: usize, widths: [usize; 3]) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    if size >= 224 {
        layers.push(LayerSpec::Conv2d { c_in, c_out: widths[0], kernel: 3, stride: 2, padding: 1 });
        layers.push(LayerSpec::MaxPool2d { pool_h: 2, pool_w: 2 });
    } else {
        layers.push(LayerSpec::Conv2d { c_in, c_out: widths[0], kernel: 3, stride: 1, padding: 1 });
    }
    let mut c = widths[0];
    for (stage, &w) in widths.iter().enumerate() {
        for block in 0..2 {
            let stride = if stage > 0 && block == 0 { 2 } else { 1 };
            let projection = (stride != 1 || c != w).then_some(Projection { c_in: c, c_out: w, stride });
            layers.push(LayerSpec::Residual {
                body: vec![
                    LayerSpec::Relu,
                    LayerSpec::Conv2d { c_in: c, c_out: w, kernel: 3, stride, padding: 1 },
                    LayerSpec::Relu,
                    LayerSpec::Conv2d { c_in: w, c_out: w, kernel: 3, stride: 1, padding: 1 },
                ],
                projection,
            });
            c = w;
        }
    }
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::Dense { d_in: c, d_out: n_classes });
    layers
}

fn check_image_size(w: usize) -> Result<()> {
    if !IMAGE_SIZES.contains(&w) {
        return Err(Error::shape(format!("image size {w} is not one of {IMAGE_SIZES:?}")));
    }
    Ok(())
}

pub fn image_cnn_spec(w: usize, n_classes: usize, widths: [usize; 3]) -> Result<ModelSpec> {
    check_image_size(w)?;
    let spec = ModelSpec {
        name: "imagecnn".into(),
        input_shape: vec![2, w, w],
        n_classes,
        layers: residual_layers(2, w, n_classes, widths),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn build_image_cnn<T: Scalar>(w: usize, n_classes: usize, widths: [usize; 3], seed: u64) -> Result<Model<T>> {
    Model::new(image_cnn_spec(w, n_classes, widths)?, seed)
}

/// The convolutional transform as the first layer, feeding the residual
/// image network on raw `[2,N]` frames.
pub fn ct_image_cnn_spec(n: usize, n_classes: usize, ct: CtConfig, widths: [usize; 3]) -> Result<ModelSpec> {
    let [_, f, w] = ct.output_shape(n)?;
    if f != w {
        return Err(Error::shape(format!("{f} filters over {n} samples give a non-square {f}x{w} image")));
    }
    check_image_size(w)?;
    let mut layers = vec![LayerSpec::ConvTransform(ct)];
    layers.extend(residual_layers(2, w, n_classes, widths));
    let spec = ModelSpec { name: "ct-imagecnn".into(), input_shape: vec![2, n], n_classes, layers };
    spec.validate()?;
    Ok(spec)
}

pub fn build_ct_image_cnn<T: Scalar>(
    n: usize,
    n_classes: usize,
    ct: CtConfig,
    widths: [usize; 3],
    seed: u64,
) -> Result<Model<T>> {
    Model::new(ct_image_cnn_spec(n, n_classes, ct, widths)?, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv5_shapes_and_count() {
        let m = build_conv5::<f32>(128, 11, CONV5_DEFAULT_WIDTHS, 0).unwrap();
        let (logits, labels) = m.predict(&Tensor::zeros(&[3, 2, 128])).unwrap();
        assert_eq!(logits.shape(), &[3, 11]);
        assert_eq!(labels.len(), 3);
        let w = CONV5_DEFAULT_WIDTHS;
        let mut analytic = 0;
        let mut c_in = 2;
        for &c in &w {
            analytic += c_in * c * 3 + c;
            c_in = c;
        }
        analytic += 256 * 4 * 11 + 11;
        assert_eq!(m.param_count(), analytic);
        assert_eq!(m.spec.param_count(), analytic);
    }

    #[test]
    fn conv5_rejects_indivisible() {
        assert!(build_conv5::<f32>(100, 8, CONV5_DEFAULT_WIDTHS, 0).is_err());
    }

    #[test]
    fn image_cnn_shapes() {
        for w in [28, 32] {
            let m = build_image_cnn::<f32>(w, 11, [4, 8, 8], 1).unwrap();
            assert_eq!(m.logits(&Tensor::zeros(&[2, 2, w, w])).unwrap().shape(), &[2, 11]);
            assert_eq!(m.param_count(), m.spec.param_count());
        }
        for w in [224, 256] {
            assert!(image_cnn_spec(w, 8, [16, 32, 64]).is_ok());
        }
        assert!(build_image_cnn::<f32>(30, 11, [4, 8, 8], 1).is_err());
    }

    #[test]
    fn ct_variant_shapes() {
        let m = build_ct_image_cnn::<f32>(128, 11, CtConfig::for_length(128), [4, 4, 8], 2).unwrap();
        assert_eq!(m.logits(&Tensor::zeros(&[1, 2, 128])).unwrap().shape(), &[1, 11]);
        let frozen = CtConfig { learnable: false, ..CtConfig::for_length(128) };
        let m = build_ct_image_cnn::<f32>(128, 11, frozen, [4, 4, 8], 2).unwrap();
        assert!(!m.is_trainable(0) && m.is_trainable(2));
    }

    #[test]
    fn zeroed_head_predicts_class_zero() {
        let mut m = build_conv5::<f32>(64, 5, [4, 4, 4, 4, 4], 3).unwrap();
        let n = m.params.len();
        m.params.get_mut(n - 2).value.fill(0.0);
        let x = Tensor::from_fn(&[4, 2, 64], |i| (i as f32).sin());
        let (logits, labels) = m.predict(&x).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        assert_eq!(labels, vec![0; 4]);
    }

    #[test]
    fn predict_is_deterministic_and_checks_geometry() {
        let m = build_conv5::<f32>(64, 3, [4, 4, 4, 4, 4], 3).unwrap();
        let x = Tensor::from_fn(&[2, 2, 64], |i| (i as f32 * 0.3).cos());
        assert_eq!(m.logits(&x).unwrap(), m.logits(&x).unwrap());
        let err = m.predict(&Tensor::zeros(&[2, 2, 32])).unwrap_err();
        assert!(err.to_string().contains("[2, 2, 32]"));
    }

    #[test]
    fn zero_residual_body_is_identity() {
        let spec = ModelSpec {
            name: "block".into(),
            input_shape: vec![3, 4, 4],
            n_classes: 48,
            layers: vec![
                LayerSpec::Residual {
                    body: vec![
                        LayerSpec::Relu,
                        LayerSpec::Conv2d { c_in: 3, c_out: 3, kernel: 3, stride: 1, padding: 1 },
                        LayerSpec::Relu,
                        LayerSpec::Conv2d { c_in: 3, c_out: 3, kernel: 3, stride: 1, padding: 1 },
                    ],
                    projection: None,
                },
                LayerSpec::Flatten,
            ],
        };
        let x = Tensor::from_fn(&[2, 3, 4, 4], |i| i as f64 - 40.0);
        let fresh = Model::<f64>::new(spec.clone(), 0).unwrap();
        assert_eq!(fresh.logits(&x).unwrap().data(), x.data());
        let mut m = Model::<f64>::initialize(spec, 0, Init::default(), false).unwrap();
        assert!(m.params.iter().any(|p| p.name == "layers.0.3.weight" && p.value.data().iter().all(|&v| v != 0.0)));
        m.params.as_mut_slice().iter_mut().for_each(|p| p.value.fill(0.0));
        assert_eq!(m.logits(&x).unwrap().data(), x.data());
    }

    #[test]
    fn only_residual_outputs_start_at_zero() {
        let m = build_image_cnn::<f32>(32, 4, [4, 8, 8], 0).unwrap();
        let shapes = m.spec.param_shapes();
        let marked: Vec<&str> = shapes.iter().filter(|p| p.residual_out).map(|p| p.name.as_str()).collect();
        assert_eq!(marked.len(), 6);
        for (s, p) in shapes.iter().zip(m.params.iter()) {
            let zero = p.value.data().iter().all(|&v| v == 0.0);
            assert_eq!(zero, s.fan_in == 0 || s.residual_out, "{}", s.name);
        }
    }
}
