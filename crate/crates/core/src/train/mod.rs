//! SGD training with minimum-test-loss model selection, and per-SNR
//! evaluation.

mod report;

pub use report::{emit_report, history_csv, EvalReport, ReportFormat};

use serde::{Deserialize, Serialize};

use crate::dataset::{batches, SampleSource};
use crate::error::{Error, Result};
use crate::models::{argmax, Model};
use crate::signal::frame_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
    pub seed: u64,
    /// Score the test set after every epoch; otherwise only after the last.
    pub eval_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, lr: 0.1, batch_size: 128, seed: 0, eval_every_epoch: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss over the epoch's batches, weighted by batch size.
    pub train_loss: f64,
    /// Accuracy of the pre-update predictions seen during the epoch.
    pub train_acc: f64,
    pub test_loss: Option<f64>,
    pub test_acc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest test loss.
    pub best: Model<f32>,
    /// Parameters after the last epoch.
    pub last: Model<f32>,
    pub best_epoch: usize,
    pub min_test_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Mean loss and accuracy of `model` over every sample of `ds`.
pub fn score<S: SampleSource + ?Sized>(model: &Model<f32>, ds: &S, batch_size: usize) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot score an empty dataset"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (bi, b) in batches(ds, batch_size, None).enumerate() {
        let logits = model.logits(&b.x)?;
        let ce = crate::ops::softmax_cross_entropy(&logits, &b.labels)?;
        if !ce.loss.is_finite() {
            return Err(Error::Divergence { epoch: 0, batch: bi, loss: ce.loss as f64 });
        }
        loss += ce.loss as f64 * b.labels.len() as f64;
        let k = model.spec.n_classes;
        correct += logits.data().chunks_exact(k).zip(&b.labels).filter(|(row, &y)| argmax(row) == y).count();
    }
    Ok((loss / ds.len() as f64, correct as f64 / ds.len() as f64))
}

fn check_geometry<S: SampleSource + ?Sized>(model: &Model<f32>, ds: &S, what: &str) -> Result<()> {
    if ds.sample_shape() != model.spec.input_shape {
        return Err(Error::shape(format!(
            "{what} samples {:?} do not match model input {:?}",
            ds.sample_shape(),
            model.spec.input_shape
        )));
    }
    if ds.n_classes() > model.spec.n_classes {
        return Err(Error::invalid(format!(
            "{what} has {} classes but the model predicts {}",
            ds.n_classes(),
            model.spec.n_classes
        )));
    }
    Ok(())
}

/// Plain mini-batch SGD on mean cross-entropy. Each epoch visits the
/// training set in a seeded order, then scores the test set; the parameters
/// with the lowest test loss are kept, the earliest epoch winning ties.
pub fn train<S: SampleSource + ?Sized>(
    model: &Model<f32>,
    train_ds: &S,
    test_ds: &S,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, train_ds, test_ds, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<S: SampleSource + ?Sized>(
    model: &Model<f32>,
    train_ds: &S,
    test_ds: &S,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_geometry(model, train_ds, "training set")?;
    check_geometry(model, test_ds, "test set")?;
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(Error::invalid("training and test sets must be nonempty"));
    }
    let k = model.spec.n_classes;
    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut min_test_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let order_seed = frame_seed(cfg.seed, 2, 0, epoch as u64);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, b) in batches(train_ds, cfg.batch_size, Some(order_seed)).enumerate() {
            current.params.zero_grad();
            let (loss, logits) = current.loss_and_grad(&b.x, &b.labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi, loss });
            }
            loss_sum += loss * b.labels.len() as f64;
            correct += logits.data().chunks_exact(k).zip(&b.labels).filter(|(row, &y)| argmax(row) == y).count();
            current.sgd_step(cfg.lr);
        }
        let mut rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_ds.len() as f64,
            train_acc: correct as f64 / train_ds.len() as f64,
            test_loss: None,
            test_acc: None,
        };
        if cfg.eval_every_epoch || epoch == cfg.epochs {
            let (tl, ta) = score(&current, test_ds, cfg.batch_size).map_err(|e| match e {
                Error::Divergence { batch, loss, .. } => Error::Divergence { epoch, batch, loss },
                e => e,
            })?;
            rec.test_loss = Some(tl);
            rec.test_acc = Some(ta);
            if tl < min_test_loss {
                min_test_loss = tl;
                best_epoch = epoch;
                best = current.clone();
            }
        }
        on_epoch(&rec);
        history.push(rec);
    }
    best.params.zero_grad();
    current.params.zero_grad();
    Ok(TrainOutcome { best, last: current, best_epoch, min_test_loss, history })
}

/// Score `model` on `ds`: overall, per recorded SNR, and the confusion
/// matrix.
pub fn evaluate<S: SampleSource + ?Sized>(model: &Model<f32>, ds: &S, batch_size: usize) -> Result<EvalReport> {
    check_geometry(model, ds, "evaluation set")?;
    if ds.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let mut truth = Vec::with_capacity(ds.len());
    let mut pred = Vec::with_capacity(ds.len());
    let mut snr = Vec::with_capacity(ds.len());
    for b in batches(ds, batch_size, None) {
        let (_, labels) = model.predict(&b.x)?;
        truth.extend(b.labels);
        pred.extend(labels);
        snr.extend(b.snr_centi_db);
    }
    let names: Vec<String> = if ds.n_classes() == model.spec.n_classes {
        ds.class_names().to_vec()
    } else {
        (0..model.spec.n_classes).map(|i| ds.class_names().get(i).cloned().unwrap_or_else(|| format!("class{i}"))).collect()
    };
    EvalReport::from_predictions(names, &truth, &pred, &snr)
}
