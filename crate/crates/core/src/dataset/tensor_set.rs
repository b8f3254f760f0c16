//! Fixed-shape labeled tensors (transform outputs) and the `IQTS0001`
//! container that stores them.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header      magic "IQTS0001" | version u32 | n_frames u64 | n_classes u32 | rank u32 | dims: rank × u32 | flags u32
//! class table n_classes × (len u16 | UTF-8 bytes)
//! records     n_frames × (label u16 | snr_centi_db i32 | seed u64 | payload: Π dims × f32)
//! ```

use std::fs;
use std::path::Path;

use crate::codec::{put_f32s, put_short_string, ByteReader};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: [u8; 8] = *b"IQTS0001";
const TENSOR_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorDataset {
    pub class_names: Vec<String>,
    pub sample_shape: Vec<usize>,
    pub labels: Vec<u16>,
    pub snr_centi_db: Vec<i32>,
    pub seeds: Vec<u64>,
    /// Row-major samples, back to back.
    pub data: Vec<f32>,
}

impl TensorDataset {
    pub fn new(class_names: Vec<String>, sample_shape: Vec<usize>) -> Self {
        Self {
            class_names,
            sample_shape,
            labels: Vec::new(),
            snr_centi_db: Vec::new(),
            seeds: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, payload: &[f32], label: u16, snr_centi_db: i32, seed: u64) -> Result<()> {
        if payload.len() != self.sample_len() {
            return Err(Error::shape(format!(
                "payload of {} values does not match sample shape {:?}",
                payload.len(),
                self.sample_shape
            )));
        }
        if label as usize >= self.class_names.len() {
            return Err(Error::invalid(format!("label {label} outside {} classes", self.class_names.len())));
        }
        self.data.extend_from_slice(payload);
        self.labels.push(label);
        self.snr_centi_db.push(snr_centi_db);
        self.seeds.push(seed);
        Ok(())
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }
}

pub fn encode_tensor_container(ds: &TensorDataset) -> Result<Vec<u8>> {
    if ds.sample_shape.is_empty() || ds.sample_shape.contains(&0) {
        return Err(Error::shape(format!("invalid sample shape {:?}", ds.sample_shape)));
    }
    let mut out = Vec::with_capacity(64 + ds.data.len() * 4 + ds.len() * 14);
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.class_names.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.sample_shape.len() as u32).to_le_bytes());
    for &d in &ds.sample_shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    for name in &ds.class_names {
        put_short_string(&mut out, name)?;
    }
    for i in 0..ds.len() {
        out.extend_from_slice(&ds.labels[i].to_le_bytes());
        out.extend_from_slice(&ds.snr_centi_db[i].to_le_bytes());
        out.extend_from_slice(&ds.seeds[i].to_le_bytes());
        put_f32s(&mut out, ds.sample(i));
    }
    Ok(out)
}

pub fn decode_tensor_container(bytes: &[u8]) -> Result<TensorDataset> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(8)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"IQTS0001\"", String::from_utf8_lossy(magic))));
    }
    let version = r.u32()?;
    if version != TENSOR_VERSION {
        return Err(Error::Format(format!("unsupported tensor container version {version}")));
    }
    let n_frames = r.u64()?;
    let n_classes = r.u32()?;
    let rank = r.u32()?;
    let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let _flags = r.u32()?;
    let names = (0..n_classes).map(|_| r.short_string()).collect::<Result<Vec<_>>>()?;
    let mut ds = TensorDataset::new(names, shape);
    let n = ds.sample_len();
    let needed = n_frames.saturating_mul((14 + 4 * n) as u64);
    if (r.remaining() as u64) < needed {
        return Err(Error::Truncated { offset: bytes.len() as u64, needed: needed - r.remaining() as u64 });
    }
    let mut payload = Vec::with_capacity(n);
    for _ in 0..n_frames {
        let label = r.u16()?;
        let snr = r.i32()?;
        let seed = r.u64()?;
        payload.clear();
        r.f32s(n, &mut payload)?;
        ds.push(&payload, label, snr, seed)?;
    }
    Ok(ds)
}

pub fn write_tensor_container(ds: &TensorDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor_container(ds)?).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_container(path: impl AsRef<Path>) -> Result<TensorDataset> {
    let path = path.as_ref();
    decode_tensor_container(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut ds = TensorDataset::new(vec!["x".into(), "y".into()], vec![2, 3, 3]);
        let p: Vec<f32> = (0..18).map(|v| v as f32 - 4.5).collect();
        ds.push(&p, 1, 1800, 7).unwrap();
        ds.push(&p.iter().map(|v| -v).collect::<Vec<_>>(), 0, -2000, 8).unwrap();
        let bytes = encode_tensor_container(&ds).unwrap();
        assert_eq!(decode_tensor_container(&bytes).unwrap(), ds);
        assert!(decode_tensor_container(&bytes[..bytes.len() - 1]).is_err());
    }
}
