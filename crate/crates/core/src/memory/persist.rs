//! Weight files: `VEME` magic, format version, a tagged architecture
//! descriptor, `f32` little-endian parameters and a trailing CRC-32.
//!
//! ```text
//! "VEME" | u16 version | u8 kind | u16 n | n × u32 descriptor | u32 count | count × f32 | u32 crc
//! ```
//! The CRC covers every byte before it.

use std::fs;
use std::path::Path;

use super::snapshot::Parameterized;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VEME";
pub const FORMAT_VERSION: u16 = 1;

/// Model types that can be written to and rebuilt from a weight file.
pub trait Persist: Parameterized + Sized {
    /// Descriptor tag distinguishing model families in the file.
    const KIND: u8;
    fn descriptor_words(&self) -> Vec<u32>;
    /// A zero-initialised model matching the descriptor.
    fn from_descriptor(words: &[u32]) -> Result<Self>;
}

/// Bytes before the parameter block plus the trailer, for a descriptor of `n` words.
pub fn overhead_bytes(descriptor_words: usize) -> usize {
    4 + 2 + 1 + 2 + 4 * descriptor_words + 4 + 4
}

pub fn encode<M: Persist>(model: &M) -> Vec<u8> {
    let desc = model.descriptor_words();
    let params = model.flat_params();
    let mut buf = Vec::with_capacity(overhead_bytes(desc.len()) + 4 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(M::KIND);
    buf.extend_from_slice(&(desc.len() as u16).to_le_bytes());
    for w in &desc {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for &p in &params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parsed header and parameter image of a weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub kind: u8,
    pub descriptor: Vec<u32>,
    pub params: Vec<f64>,
}

pub fn decode(buf: &[u8]) -> Result<WeightFile> {
    if buf.len() < overhead_bytes(0) {
        return Err(Error::Format(format!(
            "file too short ({} bytes)",
            buf.len()
        )));
    }
    if &buf[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let (body, trailer) = buf.split_at(buf.len() - 4);
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let kind = r.take(1)?[0];
    let n = r.u16()? as usize;
    let descriptor = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let count = r.u32()? as usize;
    if body.len() != r.pos + 4 * count {
        return Err(Error::Format(format!(
            "expected {} parameter bytes, found {}",
            4 * count,
            body.len().saturating_sub(r.pos)
        )));
    }
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let found = crc32fast::hash(body);
    if stored != found {
        return Err(Error::Format(format!(
            "checksum mismatch: stored {stored:#010x}, computed {found:#010x}"
        )));
    }
    let params = r
        .take(4 * count)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(WeightFile {
        kind,
        descriptor,
        params,
    })
}

pub fn save_weights<M: Persist>(model: &M, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

fn build_from<M: Persist>(file: WeightFile) -> Result<M> {
    if file.kind != M::KIND {
        return Err(Error::Format(format!(
            "file holds model kind {}, expected {}",
            file.kind,
            M::KIND
        )));
    }
    let mut model = M::from_descriptor(&file.descriptor)?;
    if model.param_count() != file.params.len() {
        return Err(Error::Format(format!(
            "descriptor implies {} parameters, file has {}",
            model.param_count(),
            file.params.len()
        )));
    }
    model.load_flat_params(&file.params)?;
    Ok(model)
}

pub fn load_weights<M: Persist>(path: &Path) -> Result<M> {
    build_from(decode(&fs::read(path)?)?)
}

/// Loads into an existing model; on any error the model is left untouched.
pub fn load_weights_into<M: Persist>(model: &mut M, path: &Path) -> Result<()> {
    let loaded: M = load_weights(path)?;
    if loaded.descriptor_words() != model.descriptor_words() {
        return Err(Error::Format(
            "file architecture differs from the target model".into(),
        ));
    }
    *model = loaded;
    Ok(())
}

/// Model kind tag stored in a weight file.
pub fn read_kind(path: &Path) -> Result<u8> {
    Ok(decode(&fs::read(path)?)?.kind)
}
