#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfmc::autodiff::{Tape, Var};
use rfmc::gradcheck::{grad_check, grad_check_model, Coverage, GradCheckReport};
use rfmc::models::{conv5_spec, ct_image_cnn_spec, image_cnn_spec, Init, Model};
use rfmc::transforms::{conv_transform_tape, init_ct_weights, CtConfig, CtWeights};
use rfmc::{Result, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Direct cross-correlation on `[B,C,H,W]` with `[O,C,kh,kw]` kernels.
pub fn naive_conv2d(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: (usize, usize), pad: (usize, usize)) -> Tensor<f64> {
    let [bn, c, h, wd] = x.shape().try_into().unwrap();
    let [o, c2, kh, kw] = w.shape().try_into().unwrap();
    assert_eq!(c, c2);
    let oh = (h + 2 * pad.0 - kh) / stride.0 + 1;
    let ow = (wd + 2 * pad.1 - kw) / stride.1 + 1;
    let mut y = Tensor::zeros(&[bn, o, oh, ow]);
    for n in 0..bn {
        for f in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = b.get(&[f]);
                    for ch in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let r = (i * stride.0 + u) as isize - pad.0 as isize;
                                let q = (j * stride.1 + v) as isize - pad.1 as isize;
                                if r >= 0 && q >= 0 && (r as usize) < h && (q as usize) < wd {
                                    s += x.get(&[n, ch, r as usize, q as usize]) * w.get(&[f, ch, u, v]);
                                }
                            }
                        }
                    }
                    y.set(&[n, f, i, j], s);
                }
            }
        }
    }
    y
}

/// Gradients of `sum(naive_conv2d(x) * g)` by explicit accumulation.
pub fn naive_conv2d_backward(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    g: &Tensor<f64>,
    stride: (usize, usize),
    pad: (usize, usize),
) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>) {
    let [bn, c, h, wd] = x.shape().try_into().unwrap();
    let [o, _, kh, kw] = w.shape().try_into().unwrap();
    let [_, _, oh, ow] = g.shape().try_into().unwrap();
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[o]);
    for n in 0..bn {
        for f in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let gv = g.get(&[n, f, i, j]);
                    db.set(&[f], db.get(&[f]) + gv);
                    for ch in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let r = (i * stride.0 + u) as isize - pad.0 as isize;
                                let q = (j * stride.1 + v) as isize - pad.1 as isize;
                                if r >= 0 && q >= 0 && (r as usize) < h && (q as usize) < wd {
                                    let (r, q) = (r as usize, q as usize);
                                    dx.set(&[n, ch, r, q], dx.get(&[n, ch, r, q]) + gv * w.get(&[f, ch, u, v]));
                                    dw.set(&[f, ch, u, v], dw.get(&[f, ch, u, v]) + gv * x.get(&[n, ch, r, q]));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Direct 1-D cross-correlation on `[B,C,L]` with `[O,C,k]` kernels.
pub fn naive_conv1d(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let [bn, c, l] = x.shape().try_into().unwrap();
    let [o, _, k] = w.shape().try_into().unwrap();
    let ol = (l + 2 * pad - k) / stride + 1;
    let mut y = Tensor::zeros(&[bn, o, ol]);
    for n in 0..bn {
        for f in 0..o {
            for t in 0..ol {
                let mut s = b.get(&[f]);
                for ch in 0..c {
                    for u in 0..k {
                        let p = (t * stride + u) as isize - pad as isize;
                        if p >= 0 && (p as usize) < l {
                            s += x.get(&[n, ch, p as usize]) * w.get(&[f, ch, u]);
                        }
                    }
                }
                y.set(&[n, f, t], s);
            }
        }
    }
    y
}

/// Non-overlapping max over the last two axes, plus the flat index of the
/// first maximal element of each window.
pub fn naive_maxpool(x: &Tensor<f64>, ph: usize, pw: usize) -> (Tensor<f64>, Vec<usize>) {
    let s = x.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let planes = x.numel() / (h * w);
    let mut out_shape = s.to_vec();
    let r = out_shape.len();
    out_shape[r - 2] = h / ph;
    out_shape[r - 1] = w / pw;
    let mut out = Vec::new();
    let mut arg = Vec::new();
    for p in 0..planes {
        for i in 0..h / ph {
            for j in 0..w / pw {
                let mut best = (f64::NEG_INFINITY, 0);
                for u in 0..ph {
                    for v in 0..pw {
                        let idx = p * h * w + (i * ph + u) * w + j * pw + v;
                        if x.data()[idx] > best.0 {
                            best = (x.data()[idx], idx);
                        }
                    }
                }
                out.push(best.0);
                arg.push(best.1);
            }
        }
    }
    (Tensor::new(&out_shape, out).unwrap(), arg)
}

pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_H: f64 = 1e-3;

/// One row of the gradient suite.
pub struct GradCase {
    pub name: &'static str,
    pub report: GradCheckReport,
}

fn projected(tape: &mut Tape<f64>, y: Var, rng: &mut ChaCha8Rng) -> Result<Var> {
    let proj = uniform(rng, tape.value(y).shape());
    tape.project(y, proj)
}

type Build = fn(&mut Tape<f64>, &[Var], &mut ChaCha8Rng) -> Result<Var>;

/// `(name, input shapes, scalar builder)` for every differentiable op.
fn op_cases() -> Vec<(&'static str, Vec<Vec<usize>>, Build)> {
    vec![
        ("conv1d k3 s1 p1", vec![vec![2, 2, 8], vec![3, 2, 3], vec![3]], |t, v, r| {
            let y = t.conv1d(v[0], v[1], v[2], 1, 1)?;
            projected(t, y, r)
        }),
        ("conv1d k3 s2 p0", vec![vec![1, 3, 9], vec![2, 3, 3], vec![2]], |t, v, r| {
            let y = t.conv1d(v[0], v[1], v[2], 2, 0)?;
            projected(t, y, r)
        }),
        ("conv2d k3 s1 p1", vec![vec![1, 2, 3, 3], vec![2, 2, 3, 3], vec![2]], |t, v, r| {
            let y = t.conv2d(v[0], v[1], v[2], 1, 1)?;
            projected(t, y, r)
        }),
        ("conv2d k3 s2 p1", vec![vec![2, 2, 5, 5], vec![3, 2, 3, 3], vec![3]], |t, v, r| {
            let y = t.conv2d(v[0], v[1], v[2], 2, 1)?;
            projected(t, y, r)
        }),
        ("maxpool2d 1x4", vec![vec![1, 2, 8]], |t, v, r| {
            let y = t.maxpool2d(v[0], 1, 4)?;
            projected(t, y, r)
        }),
        ("maxpool2d 2x2", vec![vec![2, 2, 4, 4]], |t, v, r| {
            let y = t.maxpool2d(v[0], 2, 2)?;
            projected(t, y, r)
        }),
        ("maxpool1d 2", vec![vec![2, 3, 8]], |t, v, r| {
            let y = t.maxpool1d(v[0], 2)?;
            projected(t, y, r)
        }),
        ("dense", vec![vec![4, 6], vec![5, 6], vec![5]], |t, v, r| {
            let y = t.dense(v[0], v[1], v[2])?;
            projected(t, y, r)
        }),
        ("relu", vec![vec![3, 7]], |t, v, r| {
            let y = t.relu(v[0]);
            projected(t, y, r)
        }),
        ("add", vec![vec![2, 3, 4], vec![2, 3, 4]], |t, v, r| {
            let y = t.add(v[0], v[1])?;
            projected(t, y, r)
        }),
        ("reshape+flatten", vec![vec![2, 3, 4]], |t, v, r| {
            let y = t.reshape(v[0], &[2, 1, 12])?;
            let y = t.flatten(y)?;
            projected(t, y, r)
        }),
        ("swap_axes", vec![vec![2, 3, 2, 5]], |t, v, r| {
            let y = t.swap_axes(v[0])?;
            projected(t, y, r)
        }),
        ("global_avg_pool", vec![vec![2, 3, 4, 4]], |t, v, r| {
            let y = t.global_avg_pool(v[0])?;
            projected(t, y, r)
        }),
        ("softmax_cross_entropy", vec![vec![4, 11]], |t, v, r| {
            let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..11)).collect();
            t.softmax_cross_entropy(v[0], &labels)
        }),
        ("dense+softmax_cross_entropy", vec![vec![3, 6], vec![4, 6], vec![4]], |t, v, r| {
            let y = t.dense(v[0], v[1], v[2])?;
            let labels: Vec<usize> = (0..3).map(|_| r.random_range(0..4)).collect();
            t.softmax_cross_entropy(y, &labels)
        }),
        ("conv transform", vec![vec![2, 2, 16], vec![4, 1, 3, 3], vec![4]], |t, v, r| {
            let cfg = CtConfig { filters: 4, ..CtConfig::for_length(16) };
            let y = conv_transform_tape(t, v[0], v[1], v[2], &cfg)?;
            projected(t, y, r)
        }),
    ]
}

/// Run every op and every full model through central differences at
/// `GRAD_H`, once per seed. Returns the worst report per case.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Vec<GradCase> {
    let mut out = Vec::new();
    for (name, shapes, build) in op_cases() {
        let mut worst = GradCheckReport::default();
        for seed in seeds.clone() {
            let mut r = rng(seed);
            let inputs: Vec<Tensor<f64>> = shapes.iter().map(|s| uniform(&mut r, s)).collect();
            let proj_seed: u64 = r.random();
            let rep = grad_check(&inputs, GRAD_H, Coverage::Full, |t, v| build(t, v, &mut rng(proj_seed))).unwrap();
            merge(&mut worst, rep);
        }
        out.push(GradCase { name, report: worst });
    }
    let models: [(&'static str, fn() -> rfmc::models::ModelSpec, Vec<usize>); 3] = [
        ("CONV-5 model on (2,128)", || conv5_spec(128, 11, [8, 8, 16, 16, 16]).unwrap(), vec![2, 2, 128]),
        (
            "CT + image CNN on (2,128)",
            || ct_image_cnn_spec(128, 11, CtConfig::for_length(128), [4, 8, 8]).unwrap(),
            vec![2, 2, 128],
        ),
        ("image CNN on (2,32,32)", || image_cnn_spec(32, 8, [4, 4, 8]).unwrap(), vec![1, 2, 32, 32]),
    ];
    for (name, spec, shape) in models {
        let mut worst = GradCheckReport::default();
        for seed in seeds.clone() {
            let model = Model::<f64>::initialize(spec(), seed, Init::default(), false).unwrap();
            let x = uniform(&mut rng(seed ^ 0xABCD), &shape);
            let cov = Coverage::Sampled { per_tensor: 6, seed };
            merge(&mut worst, grad_check_model(&model, &x, GRAD_H, cov, seed).unwrap());
        }
        out.push(GradCase { name, report: worst });
    }
    out
}

fn merge(acc: &mut GradCheckReport, r: GradCheckReport) {
    acc.checked += r.checked;
    acc.skipped_kinks += r.skipped_kinks;
    if r.max_rel_err >= acc.max_rel_err {
        acc.max_rel_err = r.max_rel_err;
        acc.worst = r.worst;
    }
}

/// Seeded CT weights for a geometry, as `f64`.
pub fn ct_weights(cfg: &CtConfig, seed: u64) -> CtWeights<f64> {
    init_ct_weights(cfg, seed)
}

/// Relative spread `(max − min) / mean` of the overlap-added window over
/// the region every output sample is covered by a full set of frames.
pub fn cola_spread(window: &[f64], hop: usize) -> f64 {
    let l = window.len();
    let frames = 4 * l / hop;
    let mut sum = vec![0.0; (frames - 1) * hop + l];
    for t in 0..frames {
        for (n, &w) in window.iter().enumerate() {
            sum[t * hop + n] += w;
        }
    }
    let interior = &sum[l..sum.len() - l];
    let max = interior.iter().cloned().fold(f64::MIN, f64::max);
    let min = interior.iter().cloned().fold(f64::MAX, f64::min);
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    (max - min) / mean
}

/// `Σ|X_k|² / (L · Σ|w·x|²) − 1` for one frame of length `cfg.window_len`.
pub fn parseval_error(x: &[num_complex::Complex64], cfg: &rfmc::transforms::StftConfig) -> f64 {
    let s = rfmc::transforms::stft(x, cfg).unwrap();
    assert_eq!(s.n_frames, 1);
    let w = rfmc::transforms::hann_window(cfg.window, cfg.window_len);
    let time: f64 = x.iter().zip(&w).map(|(z, &w)| (z * w).norm_sqr()).sum();
    let freq: f64 = s.frame(0).iter().map(|z| z.norm_sqr()).sum();
    (freq / (cfg.fft_len as f64 * time) - 1.0).abs()
}

/// Bin of the largest magnitude in the single frame of a pure tone at `k`.
pub fn tone_peak(k: usize, cfg: &rfmc::transforms::StftConfig) -> usize {
    let n = cfg.window_len;
    let x: Vec<num_complex::Complex64> = (0..n)
        .map(|t| num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * t) as f64 / cfg.fft_len as f64))
        .collect();
    let s = rfmc::transforms::stft(&x, cfg).unwrap();
    (0..s.n_bins).max_by(|&a, &b| s.at(0, a).norm().total_cmp(&s.at(0, b).norm()).then(b.cmp(&a))).unwrap()
}
