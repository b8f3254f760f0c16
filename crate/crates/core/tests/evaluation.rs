use std::collections::BTreeMap;

use rfmc::dataset::{IqDataset, SampleSource};
use rfmc::models::{build_conv5, conv5_spec, read_checkpoint, write_checkpoint, Model};
use rfmc::signal::{generate_dataset, ModScheme, SignalFrame, SnrPolicy, SynthConfig};
use rfmc::train::{emit_report, evaluate, history_csv, train, EvalReport, ReportFormat, TrainConfig};
use rfmc::Tensor;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

#[test]
fn ten_frame_tally_by_hand() {
    let truth = [0, 0, 1, 1, 1, 2, 2, 2, 2, 0];
    let pred = [0, 1, 1, 1, 0, 2, 2, 1, 2, 0];
    let snr = [-2000, -2000, 0, 0, 0, 1800, 1800, 1800, -2000, 0];
    let r = EvalReport::from_predictions(names(3), &truth, &pred, &snr).unwrap();
    // Correct: frames 0, 2, 3, 5, 6, 8, 9.
    assert_eq!(r.overall_accuracy, 0.7);
    assert_eq!(r.counts, vec![vec![2, 1, 0], vec![1, 2, 0], vec![0, 1, 3]]);
    assert_eq!(r.confusion[2], vec![0.0, 0.25, 0.75]);
    // -20 dB: frames 0, 1, 8 → 2/3; 0 dB: frames 2, 3, 4, 9 → 3/4; 18 dB: 5, 6, 7 → 2/3.
    assert_eq!(r.per_snr, BTreeMap::from([(-2000, 2.0 / 3.0), (0, 0.75), (1800, 2.0 / 3.0)]));
    assert_eq!(r.per_snr_count, BTreeMap::from([(-2000, 3), (0, 4), (1800, 3)]));
    assert_eq!(r.accuracy_at_or_above(0.0), Some(5.0 / 7.0));
    assert_eq!(r.accuracy_at_or_above(20.0), None);
    assert_eq!(
        emit_report(&r, ReportFormat::Csv),
        "snr_db,accuracy\n-20,0.6667\n0,0.7500\n18,0.6667\n"
    );
}

#[test]
fn report_invariants_on_random_predictions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let k = rng.random_range(2..=11);
        let n = rng.random_range(1..=300);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let snr: Vec<i32> = (0..n).map(|_| 200 * rng.random_range(-10..10)).collect();
        let r = EvalReport::from_predictions(names(k), &truth, &pred, &snr).unwrap();
        let total: u64 = r.counts.iter().flatten().sum();
        assert_eq!(total as usize, n);
        for (i, row) in r.confusion.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if r.empty_rows.contains(&i) {
                assert_eq!(s, 0.0);
            } else {
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
        let trace: u64 = (0..k).map(|i| r.counts[i][i]).sum();
        assert_eq!(r.overall_accuracy, trace as f64 / n as f64);
        let weighted: f64 = r.per_snr.iter().map(|(s, a)| a * r.per_snr_count[s] as f64).sum::<f64>() / n as f64;
        assert!((weighted - r.overall_accuracy).abs() < 1e-9);
    }
}

fn toy() -> (IqDataset, IqDataset) {
    let classes = [ModScheme::Qpsk.into(), ModScheme::Fsk4.into()];
    let cfg = SynthConfig { seed: 21, ..SynthConfig::default() };
    let ds = generate_dataset(&classes, 24, 10, 64, &SnrPolicy::Fixed(10.0), &cfg).unwrap();
    (ds.train, ds.test)
}

#[test]
fn evaluate_matches_a_manual_loop() {
    let (_, test) = toy();
    let model: Model<f32> = build_conv5(64, 2, [4, 4, 8, 8, 8], 3).unwrap();
    let r = evaluate(&model, &test, 7).unwrap();
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for i in 0..test.len() {
        let mut x = Tensor::<f32>::zeros(&[1, 2, 64]);
        test.write_sample(i, x.data_mut());
        pred.push(model.predict(&x).unwrap().1[0]);
        truth.push(test.label(i));
    }
    let snr: Vec<i32> = (0..test.len()).map(|i| test.snr_centi_db(i)).collect();
    assert_eq!(r, EvalReport::from_predictions(test.class_names.clone(), &truth, &pred, &snr).unwrap());
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let (train_ds, test_ds) = toy();
    let model = Model::<f32>::new(conv5_spec(64, 2, [4, 4, 8, 8, 8]).unwrap(), 1).unwrap();
    let cfg = TrainConfig { epochs: 1, lr: 0.0, batch_size: 16, ..TrainConfig::default() };
    let out = train(&model, &train_ds, &test_ds, &cfg).unwrap();
    for (a, b) in out.best.params.iter().zip(model.params.iter()) {
        assert_eq!(a.value.data(), b.value.data());
    }
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn selection_picks_the_minimum_test_loss_and_is_deterministic() {
    let (train_ds, test_ds) = toy();
    let model = Model::<f32>::new(conv5_spec(64, 2, [4, 4, 8, 8, 8]).unwrap(), 2).unwrap();
    let cfg = TrainConfig { epochs: 6, batch_size: 8, seed: 4, ..TrainConfig::default() };
    let a = train(&model, &train_ds, &test_ds, &cfg).unwrap();
    let b = train(&model, &train_ds, &test_ds, &cfg).unwrap();
    assert_eq!(history_csv(&a.history), history_csv(&b.history));
    let losses: Vec<f64> = a.history.iter().map(|r| r.test_loss.unwrap()).collect();
    assert!(losses.iter().all(|&l| a.min_test_loss <= l));
    let first_min = losses.iter().position(|&l| l == a.min_test_loss).unwrap();
    assert_eq!(a.best_epoch, first_min + 1);
    // Re-scoring the selected parameters reproduces the recorded loss.
    let (loss, _) = rfmc::train::score(&a.best, &test_ds, cfg.batch_size).unwrap();
    assert!((loss - a.min_test_loss).abs() < 1e-9);
}

#[test]
fn checkpoint_files_round_trip() {
    let model: Model<f32> = build_conv5(64, 3, [2, 2, 4, 4, 4], 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rfck");
    write_checkpoint(&model, &path).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back.spec, model.spec);
    let x = Tensor::from_fn(&[2, 2, 64], |i| (i as f32 * 0.1).sin());
    assert_eq!(back.logits(&x).unwrap().data(), model.logits(&x).unwrap().data());
}

#[test]
fn mismatched_geometry_is_rejected() {
    let model: Model<f32> = build_conv5(64, 2, [2, 2, 2, 2, 2], 0).unwrap();
    let mut wrong = IqDataset::new(names(2), 128);
    wrong.push(SignalFrame::new(vec![0.0; 128], vec![0.0; 128], 0, 0, 0).unwrap()).unwrap();
    assert!(evaluate(&model, &wrong, 4).is_err());
}
