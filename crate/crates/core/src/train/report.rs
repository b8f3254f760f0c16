use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EpochRecord;
use crate::error::{Error, Result};
use crate::signal::NOISELESS_CENTI_DB;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub n_test: usize,
    pub overall_accuracy: f64,
    /// Accuracy per recorded SNR, keyed in hundredths of a dB.
    pub per_snr: BTreeMap<i32, f64>,
    pub per_snr_count: BTreeMap<i32, usize>,
    /// Raw tallies: row = true label, column = prediction.
    pub counts: Vec<Vec<u64>>,
    /// `counts` with each row divided by its total.
    pub confusion: Vec<Vec<f64>>,
    /// True labels that never occur; their confusion rows are all zero.
    pub empty_rows: Vec<usize>,
    pub best_epoch: Option<usize>,
    pub min_test_loss: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(class_names: Vec<String>, truth: &[usize], pred: &[usize], snr_centi_db: &[i32]) -> Result<Self> {
        let k = class_names.len();
        if truth.len() != pred.len() || truth.len() != snr_centi_db.len() {
            return Err(Error::shape("truth, predictions and SNRs must have equal length"));
        }
        if truth.is_empty() {
            return Err(Error::invalid("cannot report on zero predictions"));
        }
        let mut counts = vec![vec![0u64; k]; k];
        let mut buckets: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
        for ((&t, &p), &s) in truth.iter().zip(pred).zip(snr_centi_db) {
            if t >= k || p >= k {
                return Err(Error::invalid(format!("label pair ({t}, {p}) outside {k} classes")));
            }
            counts[t][p] += 1;
            let e = buckets.entry(s).or_default();
            e.0 += usize::from(t == p);
            e.1 += 1;
        }
        let mut empty_rows = Vec::new();
        let confusion = counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                if n == 0 {
                    empty_rows.push(i);
                    vec![0.0; k]
                } else {
                    row.iter().map(|&c| c as f64 / n as f64).collect()
                }
            })
            .collect();
        let correct: u64 = (0..k).map(|i| counts[i][i]).sum();
        Ok(Self {
            class_names,
            n_test: truth.len(),
            overall_accuracy: correct as f64 / truth.len() as f64,
            per_snr: buckets.iter().map(|(&s, &(c, n))| (s, c as f64 / n as f64)).collect(),
            per_snr_count: buckets.iter().map(|(&s, &(_, n))| (s, n)).collect(),
            counts,
            confusion,
            empty_rows,
            best_epoch: None,
            min_test_loss: None,
        })
    }

    /// Mean accuracy over SNR buckets at or above `min_db`, weighted by
    /// bucket size. `None` when no bucket qualifies.
    pub fn accuracy_at_or_above(&self, min_db: f64) -> Option<f64> {
        let floor = (min_db * 100.0).round() as i32;
        let (c, n) = self
            .per_snr
            .iter()
            .filter(|(&s, _)| s >= floor)
            .map(|(s, &a)| {
                let n = self.per_snr_count[s] as f64;
                (a * n, n)
            })
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        (n > 0.0).then(|| c / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn snr_label(centi: i32) -> String {
    if centi == NOISELESS_CENTI_DB {
        "inf".into()
    } else if centi % 100 == 0 {
        (centi / 100).to_string()
    } else {
        format!("{:.2}", centi as f64 / 100.0)
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("snr_db,accuracy\n");
            for (&s, &a) in &report.per_snr {
                let _ = writeln!(out, "{},{a:.4}", snr_label(s));
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "Overall accuracy: {:.4} ({} test frames)", report.overall_accuracy, report.n_test);
            if let (Some(e), Some(l)) = (report.best_epoch, report.min_test_loss) {
                let _ = writeln!(out, "Selected epoch {e} (test loss {l:.4})");
            }
            out.push('\n');
            out.push_str("| SNR (dB) | Accuracy |\n|---:|---:|\n");
            for (&s, &a) in &report.per_snr {
                let _ = writeln!(out, "| {} | {a:.4} |", snr_label(s));
            }
            out.push_str("\n| true \\ predicted |");
            for name in &report.class_names {
                let _ = write!(out, " {name} |");
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(report.class_names.len()));
            out.push('\n');
            for (name, row) in report.class_names.iter().zip(&report.confusion) {
                let _ = write!(out, "| {name} |");
                for v in row {
                    let _ = write!(out, " {v:.2} |");
                }
                out.push('\n');
            }
        }
    }
    out
}

/// `epoch,train_loss,test_loss,test_acc`, one row per epoch; unscored
/// epochs leave the test columns empty.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,test_loss,test_acc\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in history {
        let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, opt(r.test_loss), opt(r.test_acc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn csv_formatting() {
        let mut r = EvalReport::from_predictions(names(2), &[0], &[0], &[0]).unwrap();
        r.per_snr = BTreeMap::from([(1800, 0.848), (-2000, 0.103)]);
        assert_eq!(emit_report(&r, ReportFormat::Csv), "snr_db,accuracy\n-20,0.1030\n18,0.8480\n");
        r.per_snr.clear();
        assert_eq!(emit_report(&r, ReportFormat::Csv), "snr_db,accuracy\n");
    }

    #[test]
    fn markdown_rounds_to_two_places() {
        let mut r = EvalReport::from_predictions(names(2), &[0, 1], &[0, 1], &[0, 0]).unwrap();
        r.confusion[0][0] = 0.996;
        let md = emit_report(&r, ReportFormat::Markdown);
        assert!(md.contains("| c0 | 1.00 | 0.00 |"));
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let truth: Vec<usize> = (0..80).map(|i| i % 8).collect();
        let r = EvalReport::from_predictions(names(8), &truth, &truth, &vec![0; 80]).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let r = EvalReport::from_predictions(names(8), &truth, &vec![0; 80], &vec![0; 80]).unwrap();
        assert_eq!(r.overall_accuracy, 0.125);
    }

    #[test]
    fn empty_rows_are_flagged() {
        let r = EvalReport::from_predictions(names(3), &[0, 2], &[1, 2], &[0, 100]).unwrap();
        assert_eq!(r.empty_rows, vec![1]);
        assert_eq!(r.confusion[1], vec![0.0; 3]);
        assert_eq!(r.per_snr[&0], 0.0);
        assert_eq!(r.per_snr[&100], 1.0);
        assert_eq!(emit_report(&r, ReportFormat::Csv), "snr_db,accuracy\n0,0.0000\n1,1.0000\n");
    }
}
