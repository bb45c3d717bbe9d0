//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "STGC" | u16 version | u32 spec_len | spec JSON
//! u32 n_params | n_params × (u32 name_len | name | u32 ndim | ndim × u32 dim | f32 data)
//! ```
//!
//! Buffers (batch-norm running statistics) are stored alongside parameters.

use std::path::Path;

use super::model::Model;
use super::spec::ModelSpec;
use crate::diffengine::{Element, Tensor};
use crate::error::{Error, Result};
use crate::prep::io::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"STGC";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint<F: Element>(model: &Model<F>) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(model.spec())?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(model.store().len() as u32).to_le_bytes());
    for (_, p) in model.store().iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.ndim() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format {
            path: self.path.to_path_buf(),
            detail: format!("truncated at byte {}", self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn fail(&self, detail: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }
}

pub fn decode_checkpoint<F: Element>(bytes: &[u8], path: &Path) -> Result<Model<F>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(r.fail("not a model checkpoint"));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(r.fail(format!("unsupported checkpoint version {version}")));
    }
    let spec_len = r.u32()?;
    let spec: ModelSpec = serde_json::from_slice(r.take(spec_len)?)?;
    let mut model = Model::<F>::build(&spec)?;
    let count = r.u32()?;
    if count != model.store().len() {
        return Err(r.fail(format!("{count} tensors stored, model has {}", model.store().len())));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| r.fail("tensor name is not UTF-8"))?.to_string();
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.take(numel.checked_mul(4).ok_or_else(|| r.fail("tensor too large"))?)?;
        let data: Vec<F> = raw
            .chunks_exact(4)
            .map(|c| F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        let id = model.store().find(&name).ok_or_else(|| r.fail(format!("unknown tensor `{name}`")))?;
        if seen[id.index()] {
            return Err(r.fail(format!("tensor `{name}` appears twice")));
        }
        seen[id.index()] = true;
        let slot = &mut model.store_mut().get_mut(id).value;
        if slot.shape() != shape.as_slice() {
            return Err(r.fail(format!("tensor `{name}` has shape {shape:?}, model expects {:?}", slot.shape())));
        }
        *slot = Tensor::new(shape, data)?;
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last tensor"));
    }
    Ok(model)
}

pub fn save_checkpoint<F: Element>(model: &Model<F>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint<F: Element>(path: &Path) -> Result<Model<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
