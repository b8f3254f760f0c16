//! Model checkpoints, little-endian:
//!
//! ```text
//! magic "RFCK0001" | version u32 | spec_len u32 | spec JSON | n_params u32
//! per parameter: name (u16 len | UTF-8) | rank u32 | dims rank × u32 | f32 payload
//! ```

use std::fs;
use std::path::Path;

use super::build::Model;
use super::spec::ModelSpec;
use crate::autodiff::ParamSet;
use crate::codec::{put_f32s, put_short_string, ByteReader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"RFCK0001";
const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Model<f32>) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(&model.spec).map_err(|e| Error::Format(format!("cannot serialize spec: {e}")))?;
    let mut out = Vec::with_capacity(64 + spec.len() + model.param_count() * 4);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for p in model.params.iter() {
        put_short_string(&mut out, &p.name)?;
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, p.value.data());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(8)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}, expected \"RFCK0001\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let spec_len = r.u32()? as usize;
    let spec: ModelSpec = serde_json::from_slice(r.take(spec_len)?)
        .map_err(|e| Error::Format(format!("invalid model spec in checkpoint: {e}")))?;
    let n = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..n {
        let name = r.short_string()?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        r.f32s(numel, &mut data)?;
        params.push(name, Tensor::new(&shape, data)?);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after the last parameter", r.remaining())));
    }
    Model::from_parts(spec, params)
}

pub fn write_checkpoint(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
