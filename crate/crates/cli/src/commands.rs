use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rfmc::dataset::{
    decode_container, decode_tensor_container, write_container, write_tensor_container, IqDataset, SampleSource,
    TensorDataset, CONTAINER_MAGIC, TENSOR_MAGIC,
};
use rfmc::gradcheck::{grad_check_model, Coverage};
use rfmc::models::{
    conv5_spec, ct_image_cnn_spec, image_cnn_spec, read_checkpoint, write_checkpoint, Init, Model, ModelSpec,
    CONV5_DEFAULT_WIDTHS, PAPER_CONV5_PARAMS,
};
use rfmc::signal::{generate_dataset, Modulation, SnrPolicy, SynthConfig};
use rfmc::train::{emit_report, evaluate, history_csv, train_with, ReportFormat, TrainConfig};
use rfmc::transforms::{conv_transform_dataset, init_ct_weights, stft_dataset, CtConfig, StftConfig};
use rfmc::Tensor;
use serde_json::json;

use crate::manifest::write_manifest;
use crate::{Command, ConvertArgs, EvalArgs, Format, GradcheckArgs, InitKind, ModelKind, SnrDraw, SynthArgs, TrainArgs, Transform};

/// A flag value that parsed but makes no sense.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 usage, 2 data, 3 numerical divergence.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(rfmc::Error::Divergence { .. }) = cause.downcast_ref::<rfmc::Error>() {
            return 3;
        }
    }
    2
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Convert(a) => convert(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn parse_snr(spec: &str, draw: SnrDraw) -> Result<SnrPolicy> {
    let grid = |g: Vec<f64>| match draw {
        SnrDraw::Uniform => SnrPolicy::Uniform(g),
        SnrDraw::Stratified => SnrPolicy::Stratified(g),
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad SNR value {s:?}")));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["noiseless"] => Ok(SnrPolicy::Noiseless),
        ["grid"] => Ok(grid(SnrPolicy::grid(0.0, 18.0, 2.0))),
        ["grid", lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0 && hi >= lo) {
                return Err(usage(format!("bad SNR grid {spec:?}")));
            }
            Ok(grid(SnrPolicy::grid(lo, hi, step)))
        }
        ["fixed", db] => Ok(SnrPolicy::Fixed(num(db)?)),
        [db] => Ok(SnrPolicy::Fixed(num(db)?)),
        _ => Err(usage(format!("bad SNR policy {spec:?}"))),
    }
}

fn parse_widths<const K: usize>(s: Option<&str>, default: [usize; K]) -> Result<[usize; K]> {
    let Some(s) = s else { return Ok(default) };
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().ok().filter(|&w| w > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| usage(format!("bad widths {s:?}")))?;
    v.try_into().map_err(|_| usage(format!("expected {K} widths, got {s:?}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let classes = Modulation::parse_list(&a.classes).map_err(|e| usage(e.to_string()))?;
    let snr = parse_snr(&a.snr, a.snr_draw)?;
    let cfg = SynthConfig {
        samples_per_symbol: a.samples_per_symbol,
        rrc_rolloff: a.rrc_rolloff,
        gmsk_bt: a.gmsk_bt,
        fm_deviation: a.fm_deviation,
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let ds = generate_dataset(&classes, a.train_per_class, a.test_per_class, a.n_samples, &snr, &cfg)?;
    create_dir(&a.out)?;
    let train = a.out.join("train.iqds");
    let test = a.out.join("test.iqds");
    write_container(&ds.train, &train)?;
    write_container(&ds.test, &test)?;
    let config = json!({ "args": &a, "synth": cfg, "snr_policy": snr });
    write_manifest(&a.out.join("manifest.json"), "synth", a.seed, config, &[], &[train.clone(), test.clone()])?;
    println!(
        "wrote {} train and {} test frames ({} classes, N={}) to {}",
        ds.train.len(),
        ds.test.len(),
        classes.len(),
        a.n_samples,
        a.out.display()
    );
    Ok(())
}

enum Data {
    Iq(IqDataset),
    Tensor(TensorDataset),
}

impl Data {
    fn source(&self) -> &dyn SampleSource {
        match self {
            Data::Iq(d) => d,
            Data::Tensor(d) => d,
        }
    }
}

fn load(path: &Path) -> Result<Data> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let data = if bytes.starts_with(&TENSOR_MAGIC) {
        Data::Tensor(decode_tensor_container(&bytes)?)
    } else if bytes.starts_with(&CONTAINER_MAGIC[..4]) || bytes.len() < 8 {
        Data::Iq(decode_container(&bytes)?)
    } else {
        bail!(rfmc::Error::Format(format!("{} is not an rfmc container", path.display())));
    };
    Ok(data)
}

fn load_iq(path: &Path) -> Result<IqDataset> {
    match load(path).with_context(|| format!("loading {}", path.display()))? {
        Data::Iq(d) => Ok(d),
        Data::Tensor(_) => bail!(rfmc::Error::Format(format!("{} holds tensors, expected I/Q frames", path.display()))),
    }
}

fn convert(a: ConvertArgs) -> Result<()> {
    let ds = load_iq(&a.input)?;
    let out = match a.transform {
        Transform::Ct => {
            let filters = a.filters.unwrap_or(ds.n_samples / 4);
            let cfg = CtConfig { filters, learnable: false, ..CtConfig::for_length(ds.n_samples) };
            let w = init_ct_weights(&cfg, a.seed);
            conv_transform_dataset(&ds, &cfg, &w)?
        }
        Transform::Stft => {
            let cfg = StftConfig {
                window_len: a.win,
                overlap: a.overlap,
                fft_len: a.fft_len.unwrap_or(a.win),
                out_size: a.out_size,
                ..StftConfig::default()
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            stft_dataset(&ds, &cfg)?
        }
    };
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_tensor_container(&out, &a.out)?;
    let manifest = sidecar(&a.out);
    write_manifest(&manifest, "convert", a.seed, json!({ "args": &a }), &[a.input.clone()], &[a.out.clone()])?;
    println!("wrote {} tensors of shape {:?} to {}", out.len(), out.sample_shape, a.out.display());
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn find_split(dir: &Path, split: &str) -> Result<PathBuf> {
    for ext in ["iqds", "iqts"] {
        let p = dir.join(format!("{split}.{ext}"));
        if p.exists() {
            return Ok(p);
        }
    }
    bail!(rfmc::Error::InvalidArgument(format!("no {split}.iqds or {split}.iqts in {}", dir.display())))
}

fn init_of(k: InitKind) -> Init {
    match k {
        InitKind::He => Init::HeUniform,
        InitKind::Lecun => Init::LecunUniform,
        InitKind::Uniform => Init::Uniform,
        InitKind::Glorot => Init::GlorotUniform,
    }
}

fn model_spec(kind: ModelKind, sample_shape: &[usize], n_classes: usize, widths: Option<&str>) -> Result<ModelSpec> {
    let spec = match (kind, sample_shape) {
        (ModelKind::Conv5, &[2, n]) => conv5_spec(n, n_classes, parse_widths(widths, CONV5_DEFAULT_WIDTHS)?)?,
        (ModelKind::CtImagecnn, &[2, n]) => {
            ct_image_cnn_spec(n, n_classes, CtConfig::for_length(n), parse_widths(widths, IMAGE_WIDTHS)?)?
        }
        (ModelKind::Imagecnn, &[2, h, w]) if h == w => image_cnn_spec(w, n_classes, parse_widths(widths, IMAGE_WIDTHS)?)?,
        _ => bail!(rfmc::Error::Shape(format!("model {kind:?} cannot take samples of shape {sample_shape:?}"))),
    };
    Ok(spec)
}

const IMAGE_WIDTHS: [usize; 3] = [16, 32, 64];

fn train(a: TrainArgs) -> Result<()> {
    let (train_path, test_path) = match (&a.data, &a.train, &a.test) {
        (Some(dir), _, _) => (find_split(dir, "train")?, find_split(dir, "test")?),
        (None, Some(tr), Some(te)) => (tr.clone(), te.clone()),
        _ => return Err(usage("give --data DIR or both --train and --test")),
    };
    let train_data = load(&train_path).with_context(|| format!("loading {}", train_path.display()))?;
    let test_data = load(&test_path).with_context(|| format!("loading {}", test_path.display()))?;
    let (tr, te) = (train_data.source(), test_data.source());
    if tr.sample_shape() != te.sample_shape() || tr.class_names() != te.class_names() {
        bail!(rfmc::Error::Shape("train and test containers have different geometry or classes".into()));
    }
    let defaults = TrainConfig::default();
    let cfg = TrainConfig { epochs: a.epochs, lr: a.lr, batch_size: a.batch.unwrap_or(defaults.batch_size), seed: a.seed, ..defaults };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let spec = model_spec(a.model, &tr.sample_shape(), tr.n_classes(), a.widths.as_deref())?;
    let init = init_of(a.init);
    let model = Model::<f32>::with_init(spec, a.seed, init)?;
    eprintln!("{} with {} parameters", model.spec.name, model.param_count());
    if model.spec.name == "conv5" {
        eprintln!("(reference CONV-5 reports {PAPER_CONV5_PARAMS} trainable parameters)");
    }
    let out = train_with(&model, tr, te, &cfg, |r| {
        eprintln!(
            "epoch {:>3}  train_loss {:.4}  test_loss {:.4}  test_acc {:.4}",
            r.epoch,
            r.train_loss,
            r.test_loss.unwrap_or(f64::NAN),
            r.test_acc.unwrap_or(f64::NAN)
        );
    })?;
    let mut report = evaluate(&out.best, te, cfg.batch_size)?;
    report.best_epoch = Some(out.best_epoch);
    report.min_test_loss = Some(out.min_test_loss);

    create_dir(&a.out_dir)?;
    let ckpt = a.out_dir.join("checkpoint.rfck");
    let hist = a.out_dir.join("history.csv");
    let rep_md = a.out_dir.join("report.md");
    let rep_csv = a.out_dir.join("report.csv");
    let rep_json = a.out_dir.join("report.json");
    write_checkpoint(&out.best, &ckpt)?;
    write(&hist, &history_csv(&out.history))?;
    write(&rep_md, &emit_report(&report, ReportFormat::Markdown))?;
    write(&rep_csv, &emit_report(&report, ReportFormat::Csv))?;
    write(&rep_json, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let config = json!({ "args": &a, "train": cfg, "init": init, "spec": &out.best.spec });
    write_manifest(
        &a.out_dir.join("manifest.json"),
        "train",
        a.seed,
        config,
        &[train_path, test_path],
        &[ckpt, hist, rep_md, rep_csv, rep_json],
    )?;
    println!(
        "best epoch {} (test loss {:.4}), accuracy {:.4}",
        out.best_epoch, out.min_test_loss, report.overall_accuracy
    );
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = read_checkpoint(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let data = load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    if a.batch == 0 {
        return Err(usage("batch must be positive"));
    }
    let report = evaluate(&model, data.source(), a.batch)?;
    let text = match a.format {
        Format::Csv => emit_report(&report, ReportFormat::Csv),
        Format::Markdown => emit_report(&report, ReportFormat::Markdown),
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    eprintln!("accuracy={:.4}", report.overall_accuracy);
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            write_manifest(
                &sidecar(path),
                "eval",
                0,
                json!({ "args": &a }),
                &[a.data.clone(), a.checkpoint.clone()],
                &[path.clone()],
            )?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    if !(a.tol > 0.0 && a.perturbation > 0.0) {
        return Err(usage("tolerance and perturbation must be positive"));
    }
    let (spec, shape) = match a.model {
        ModelKind::Conv5 => (conv5_spec(128, 11, parse_widths(a.widths.as_deref(), [8, 8, 16, 16, 16])?)?, vec![2, 2, 128]),
        ModelKind::Imagecnn => (image_cnn_spec(32, 11, parse_widths(a.widths.as_deref(), [4, 8, 8])?)?, vec![2, 2, 32, 32]),
        ModelKind::CtImagecnn => {
            (ct_image_cnn_spec(128, 11, CtConfig::for_length(128), parse_widths(a.widths.as_deref(), [4, 8, 8])?)?, vec![1, 2, 128])
        }
    };
    let model = Model::<f64>::initialize(spec, a.seed, Init::default(), false)?;
    let x = Tensor::<f64>::from_fn(&shape, |i| ((i as f64 + 1.0) * 0.7548776662).fract() * 2.0 - 1.0);
    let coverage = if a.per_tensor == 0 { Coverage::Full } else { Coverage::Sampled { per_tensor: a.per_tensor, seed: a.seed } };
    let r = grad_check_model(&model, &x, a.perturbation, coverage, a.seed)?;
    let verdict = if r.passes(a.tol) { "PASS" } else { "FAIL" };
    println!(
        "{verdict} max_rel_err={:.3e} checked={} skipped_kinks={} params={}",
        r.max_rel_err,
        r.checked,
        r.skipped_kinks,
        model.param_count()
    );
    if !r.passes(a.tol) {
        bail!(rfmc::Error::InvalidArgument(format!("gradient check failed at tolerance {}", a.tol)));
    }
    Ok(())
}
