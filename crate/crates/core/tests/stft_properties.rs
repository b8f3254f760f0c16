mod common;

use common::*;
use num_complex::Complex64;
use rand::Rng;
use rfmc::signal::{modulate, ModScheme, SynthConfig};
use rfmc::transforms::{hann_window, stft, stft_image, ChannelMode, StftConfig, Window};

#[test]
fn parseval_holds_per_frame() {
    let cfg = StftConfig::default();
    let mut r = rng(3);
    for _ in 0..20 {
        let x: Vec<Complex64> =
            (0..cfg.window_len).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        assert!(parseval_error(&x, &cfg) < 1e-12);
    }
    for window in [Window::HannPeriodic, Window::Rectangular] {
        let cfg = StftConfig { window, ..StftConfig::default() };
        let x: Vec<Complex64> = (0..128).map(|t| Complex64::from_polar(1.0, 0.3 * t as f64)).collect();
        assert!(parseval_error(&x, &cfg) < 1e-12);
    }
}

#[test]
fn pure_tones_peak_at_their_bin() {
    for window in [Window::Hann, Window::HannPeriodic, Window::Rectangular] {
        let cfg = StftConfig { window, ..StftConfig::default() };
        for k in 0..128 {
            assert_eq!(tone_peak(k, &cfg), k, "{window:?}");
        }
    }
}

#[test]
fn hann_overlap_add_flatness() {
    // The periodic window tiles exactly at hop L/8; the symmetric one,
    // with its L−1 denominator, does not.
    assert!(cola_spread(&hann_window(Window::HannPeriodic, 128), 16) < 1e-12);
    let sym = cola_spread(&hann_window(Window::Hann, 128), 16);
    assert!(sym > 1e-4 && sym < 1e-3, "symmetric spread {sym}");
}

#[test]
fn frame_count_and_hop() {
    let cfg = StftConfig::default();
    let x = vec![Complex64::new(1.0, 0.0); 1024];
    let s = stft(&x, &cfg).unwrap();
    assert_eq!((s.n_frames, s.n_bins), (57, 128));
    // A delayed copy shifts the spectrogram by whole frames.
    let mut r = rng(4);
    let y: Vec<Complex64> = (0..1024 + 32).map(|_| Complex64::new(r.random_range(-1.0..1.0), 0.0)).collect();
    let a = stft(&y[32..], &cfg).unwrap();
    let b = stft(&y, &cfg).unwrap();
    for t in 0..a.n_frames {
        for k in 0..128 {
            assert!((a.at(t, k) - b.at(t + 2, k)).norm() < 1e-9);
        }
    }
}

#[test]
fn images_have_the_requested_size_and_channels() {
    let f = modulate(ModScheme::Ofdm.into(), 1024, &SynthConfig::default(), 1).unwrap();
    for w in [256, 224, 32, 28] {
        let img = stft_image(&f, &StftConfig { out_size: w, ..StftConfig::default() }).unwrap();
        assert_eq!(img.shape(), &[2, w, w]);
        assert!(img.is_finite());
    }
    let cfg = StftConfig { channel_mode: ChannelMode::MagnitudePhase, out_size: 57, ..StftConfig::default() };
    let img = stft_image(&f, &cfg).unwrap();
    let s = stft(&f.to_complex(), &cfg).unwrap();
    // 57 rows resample onto themselves; columns are stretched from 128 bins.
    assert!((img.get(&[0, 5, 0]) as f64 - s.at(5, 0).norm()).abs() < 1e-4);
    assert!((img.get(&[0, 5, 56]) as f64 - s.at(5, 127).norm()).abs() < 1e-4);
    assert!(img.data()[57 * 57..].iter().all(|p| p.abs() <= std::f32::consts::PI + 1e-6));
}
