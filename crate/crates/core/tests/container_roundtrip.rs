use proptest::prelude::*;
use rfmc::dataset::{
    decode_container, decode_tensor_container, encode_container, encode_tensor_container, read_container, write_container,
    IqDataset, TensorDataset,
};
use rfmc::signal::{SignalFrame, NOISELESS_CENTI_DB};

/// Finite f32 values with extra weight on signed zeros and subnormals.
fn payload_value() -> impl Strategy<Value = f32> {
    prop_oneof![
        3 => any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite()),
        1 => Just(-0.0f32),
        1 => Just(0.0f32),
        1 => (1u32..0x0080_0000, any::<bool>()).prop_map(|(m, neg)| f32::from_bits(m | (u32::from(neg) << 31))),
        1 => Just(f32::MIN_POSITIVE),
        1 => Just(f32::MAX),
    ]
}

fn snr() -> impl Strategy<Value = i32> {
    prop_oneof![Just(NOISELESS_CENTI_DB), -2000i32..=1800]
}

fn iq_dataset() -> impl Strategy<Value = IqDataset> {
    (1usize..=5, 1usize..=24, 0usize..=12).prop_flat_map(|(k, n, frames)| {
        let names = prop::collection::vec("[a-z0-9_-]{1,10}", k);
        let frame = (
            prop::collection::vec(payload_value(), n),
            prop::collection::vec(payload_value(), n),
            0..k as u16,
            snr(),
            any::<u64>(),
        );
        (names, prop::collection::vec(frame, frames)).prop_map(move |(names, fs)| {
            let mut ds = IqDataset::new(names, n);
            for (i, q, label, s, seed) in fs {
                ds.push(SignalFrame::new(i, q, label, s, seed).unwrap()).unwrap();
            }
            ds
        })
    })
}

fn tensor_dataset() -> impl Strategy<Value = TensorDataset> {
    prop::collection::vec(1usize..=4, 1..=3).prop_flat_map(|shape| {
        let len: usize = shape.iter().product();
        let row = (prop::collection::vec(payload_value(), len), 0u16..3, snr(), any::<u64>());
        prop::collection::vec(row, 0..=6).prop_map(move |rows| {
            let mut ds = TensorDataset::new(vec!["a".into(), "b".into(), "c".into()], shape.clone());
            for (payload, label, s, seed) in rows {
                ds.push(&payload, label, s, seed).unwrap();
            }
            ds
        })
    })
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn assert_bit_equal(a: &IqDataset, b: &IqDataset) {
    assert_eq!(a.class_names, b.class_names);
    assert_eq!(a.n_samples, b.n_samples);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.frames.iter().zip(&b.frames) {
        assert_eq!((x.label, x.snr_centi_db, x.seed), (y.label, y.snr_centi_db, y.seed));
        assert_eq!(bits(&x.i), bits(&y.i));
        assert_eq!(bits(&x.q), bits(&y.q));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn iq_container_is_bit_exact(ds in iq_dataset()) {
        let bytes = encode_container(&ds).unwrap();
        let back = decode_container(&bytes).unwrap();
        assert_bit_equal(&ds, &back);
        prop_assert_eq!(encode_container(&back).unwrap(), bytes);
    }

    #[test]
    fn tensor_container_is_bit_exact(ds in tensor_dataset()) {
        let bytes = encode_tensor_container(&ds).unwrap();
        let back = decode_tensor_container(&bytes).unwrap();
        prop_assert_eq!(&back.class_names, &ds.class_names);
        prop_assert_eq!(&back.sample_shape, &ds.sample_shape);
        prop_assert_eq!(&back.labels, &ds.labels);
        prop_assert_eq!(&back.snr_centi_db, &ds.snr_centi_db);
        prop_assert_eq!(&back.seeds, &ds.seeds);
        prop_assert_eq!(bits(&back.data), bits(&ds.data));
    }

    #[test]
    fn truncation_is_rejected(ds in iq_dataset(), cut in 1usize..64) {
        let bytes = encode_container(&ds).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_container(&bytes[..keep]).is_err());
    }
}

#[test]
fn file_round_trip_keeps_negative_zero() {
    let mut ds = IqDataset::new(vec!["x".into(), "y".into()], 3);
    let tiny = f32::from_bits(1);
    ds.push(SignalFrame::new(vec![-0.0, tiny, -tiny], vec![0.0, f32::MAX, f32::MIN], 1, -2000, 42).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.iqds");
    write_container(&ds, &path).unwrap();
    let back = read_container(&path).unwrap();
    assert_bit_equal(&ds, &back);
    assert!(back.frames[0].i[0].is_sign_negative());
}

#[test]
fn wrong_magic_is_named() {
    let mut bytes = encode_container(&IqDataset::new(vec!["a".into()], 4)).unwrap();
    bytes[7] = b'2';
    let err = decode_container(&bytes).unwrap_err().to_string();
    assert!(err.contains("IQDS0002"), "{err}");
}
