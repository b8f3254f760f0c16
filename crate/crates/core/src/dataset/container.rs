//! The `IQDS0001` dataset container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header      magic "IQDS0001" | version u32 | n_frames u64 | n_samples u32 | n_classes u32 | flags u32
//! class table n_classes × (len u16 | UTF-8 bytes)
//! records     n_frames × (label u16 | snr_centi_db i32 | seed u64 | I: n_samples × f32 | Q: n_samples × f32)
//! ```

use std::fs;
use std::path::Path;

use super::IqDataset;
use crate::codec::{put_f32s, put_short_string, ByteReader};
use crate::error::{Error, Result};
use crate::signal::SignalFrame;

pub const CONTAINER_MAGIC: [u8; 8] = *b"IQDS0001";
pub const CONTAINER_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u32,
    pub n_frames: u64,
    pub n_samples: u32,
    pub n_classes: u32,
    pub flags: u32,
}

impl ContainerHeader {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&CONTAINER_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.n_frames.to_le_bytes());
        out.extend_from_slice(&self.n_samples.to_le_bytes());
        out.extend_from_slice(&self.n_classes.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let magic = r.take(8)?;
        if magic != CONTAINER_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&CONTAINER_MAGIC)
            )));
        }
        let version = r.u32()?;
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        Ok(Self { version, n_frames: r.u64()?, n_samples: r.u32()?, n_classes: r.u32()?, flags: r.u32()? })
    }
}

pub fn encode_container(ds: &IqDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let n_samples = u32::try_from(ds.n_samples).map_err(|_| Error::invalid("frame length exceeds u32"))?;
    let header = ContainerHeader {
        version: CONTAINER_VERSION,
        n_frames: ds.len() as u64,
        n_samples,
        n_classes: ds.n_classes() as u32,
        flags: 0,
    };
    let record = 2 + 4 + 8 + 8 * ds.n_samples;
    let mut out = Vec::with_capacity(HEADER_LEN + 64 * ds.n_classes() + record * ds.len());
    header.write(&mut out);
    for name in &ds.class_names {
        put_short_string(&mut out, name)?;
    }
    for f in &ds.frames {
        out.extend_from_slice(&f.label.to_le_bytes());
        out.extend_from_slice(&f.snr_centi_db.to_le_bytes());
        out.extend_from_slice(&f.seed.to_le_bytes());
        put_f32s(&mut out, &f.i);
        put_f32s(&mut out, &f.q);
    }
    Ok(out)
}

pub fn decode_container(bytes: &[u8]) -> Result<IqDataset> {
    let mut r = ByteReader::new(bytes);
    let h = ContainerHeader::read(&mut r)?;
    let class_names = (0..h.n_classes).map(|_| r.short_string()).collect::<Result<Vec<_>>>()?;
    let n = h.n_samples as usize;
    let record = (2 + 4 + 8 + 8 * n) as u64;
    let needed = h.n_frames.saturating_mul(record);
    if (r.remaining() as u64) < needed {
        return Err(Error::Truncated { offset: bytes.len() as u64, needed: needed - r.remaining() as u64 });
    }
    let mut ds = IqDataset::new(class_names, n);
    ds.frames.reserve(h.n_frames as usize);
    for _ in 0..h.n_frames {
        let at = r.position();
        let label = r.u16()?;
        let snr = r.i32()?;
        let seed = r.u64()?;
        let mut i = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        r.f32s(n, &mut i)?;
        r.f32s(n, &mut q)?;
        ds.push(SignalFrame { i, q, label, snr_centi_db: snr, seed })
            .map_err(|e| Error::Format(format!("record at byte offset {at}: {e}")))?;
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after the last record", r.remaining())));
    }
    Ok(ds)
}

pub fn write_container(ds: &IqDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_container(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<IqDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IqDataset {
        let mut ds = IqDataset::new(vec!["qpsk".into(), "fm".into()], 3);
        ds.push(SignalFrame::new(vec![1.0, -0.0, 2.5], vec![0.0, f32::MIN_POSITIVE / 2.0, -1.0], 1, -2000, 42).unwrap())
            .unwrap();
        ds
    }

    #[test]
    fn empty_dataset_is_header_plus_class_table() {
        let ds = IqDataset::new(vec!["ab".into()], 128);
        let bytes = encode_container(&ds).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2 + 2);
        assert_eq!(&bytes[..8], b"IQDS0001");
        assert_eq!(decode_container(&bytes).unwrap(), ds);
    }

    #[test]
    fn record_layout_is_fixed_width() {
        let ds = sample();
        let bytes = encode_container(&ds).unwrap();
        let table = 2 + 4 + 2 + 2;
        assert_eq!(bytes.len(), HEADER_LEN + table + 2 + 4 + 8 + 2 * 3 * 4);
        let rec = &bytes[HEADER_LEN + table..];
        assert_eq!(u16::from_le_bytes([rec[0], rec[1]]), 1);
        assert_eq!(i32::from_le_bytes(rec[2..6].try_into().unwrap()), -2000);
        assert_eq!(u64::from_le_bytes(rec[6..14].try_into().unwrap()), 42);
        assert_eq!(f32::from_le_bytes(rec[14..18].try_into().unwrap()), 1.0);
        // Q row follows the whole I row.
        assert_eq!(f32::from_le_bytes(rec[34..38].try_into().unwrap()), -1.0);
    }

    #[test]
    fn bad_magic_is_named() {
        let mut bytes = encode_container(&sample()).unwrap();
        bytes[7] = b'2';
        let err = decode_container(&bytes).unwrap_err().to_string();
        assert!(err.contains("IQDS0002"), "{err}");
    }

    #[test]
    fn bad_version_rejected() {
        let mut bytes = encode_container(&sample()).unwrap();
        bytes[8] = 2;
        assert!(decode_container(&bytes).unwrap_err().to_string().contains("version 2"));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_container(&sample()).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        match decode_container(cut).unwrap_err() {
            Error::Truncated { offset, needed } => {
                assert_eq!(offset, cut.len() as u64);
                assert_eq!(needed, 5);
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(decode_container(&bytes[..20]), Err(Error::Truncated { .. })));
    }
}
