//! Parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DANCKPT1"  u32 version  u32 tensor count
//! per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims[rank], f32 data
//! u32 CRC-32 of every preceding byte
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use dan_core::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"DANCKPT1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint version {found}, expected {VERSION}")]
    Version { found: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("checkpoint ends early")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint does not match the model: missing [{}], extra [{}]", .missing.join(", "), .extra.join(", "))]
    Mismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn encode(store: &ParamStore<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.num_elements() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (_, p) in store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses and validates a checkpoint into a fresh store, in file order.
pub fn decode(bytes: &[u8]) -> Result<ParamStore<f32>, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 8 {
        return Err(CheckpointError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::Crc { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 12 };
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(CheckpointError::Truncated)?;
        let raw = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated)?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let t = Tensor::new(dims, data).map_err(|e| CheckpointError::Malformed(format!("{name}: {e}")))?;
        store.add(name, t).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Malformed("trailing bytes before the checksum".into()));
    }
    Ok(store)
}

/// Copies every tensor of `loaded` into the same-named parameter of `model`.
/// Any name present on only one side, or a shape disagreement, is reported.
pub fn load_into(model: &mut ParamStore<f32>, loaded: &ParamStore<f32>) -> Result<(), CheckpointError> {
    let have: BTreeSet<&str> = loaded.iter().map(|(_, p)| p.name.as_str()).collect();
    let want: BTreeSet<&str> = model.iter().map(|(_, p)| p.name.as_str()).collect();
    let missing: Vec<String> = want.difference(&have).map(|s| s.to_string()).collect();
    let extra: Vec<String> = have.difference(&want).map(|s| s.to_string()).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CheckpointError::Mismatch { missing, extra });
    }
    for (_, src) in loaded.iter() {
        let id = model.find(&src.name).expect("names checked above");
        let dst = model.get_mut(id);
        if dst.value.shape() != src.value.shape() {
            return Err(CheckpointError::Malformed(format!(
                "{}: shape {:?} in file, {:?} in model",
                src.name,
                src.value.shape(),
                dst.value.shape()
            )));
        }
        dst.value = src.value.clone();
    }
    Ok(())
}

pub fn save_checkpoint(store: &ParamStore<f32>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(store)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore<f32>, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
