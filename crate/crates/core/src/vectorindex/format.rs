//! Binary index sidecar.
//!
//! All integers little-endian:
//!
//! ```text
//! magic            8 bytes  "INSPIDX\0"
//! version major    u16
//! version minor    u16
//! dimension        u32
//! chunk_max_chars  u32
//! k                u32
//! app count        u64
//! per app (ascending app_id):
//!   id length      u32, then UTF-8 id bytes
//!   chunk count    u32
//!   chunk count x dimension f64 components, chunk 0 first
//! ```

use std::collections::BTreeMap;

use super::{EmbeddingVector, IndexConfig, VectorIndex};
use crate::persist::{check_version, PersistError};

pub const INDEX_MAGIC: &[u8; 8] = b"INSPIDX\0";
pub const INDEX_VERSION_MAJOR: u16 = 1;
pub const INDEX_VERSION_MINOR: u16 = 0;

pub(super) fn encode(index: &VectorIndex) -> Vec<u8> {
    let dim = index.config.dimension;
    let mut out = Vec::with_capacity(40 + index.chunk_count() * dim * 8);
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION_MAJOR.to_le_bytes());
    out.extend_from_slice(&INDEX_VERSION_MINOR.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(index.config.chunk_max_chars as u32).to_le_bytes());
    out.extend_from_slice(&(index.config.k as u32).to_le_bytes());
    out.extend_from_slice(&(index.apps.len() as u64).to_le_bytes());
    for (id, chunks) in &index.apps {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&(chunks.len() as u32).to_le_bytes());
        for v in chunks {
            for x in v.values() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| PersistError::Corrupt(format!("index truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, PersistError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<VectorIndex, PersistError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != INDEX_MAGIC {
        return Err(PersistError::WrongFormat {
            expected: "inspire-index".into(),
            found: "unknown binary".into(),
        });
    }
    let major = r.u16()?;
    let minor = r.u16()?;
    check_version(
        "inspire-index",
        &format!("{major}.{minor}"),
        &format!("{INDEX_VERSION_MAJOR}.{INDEX_VERSION_MINOR}"),
    )?;
    let config = IndexConfig {
        dimension: r.u32()? as usize,
        chunk_max_chars: r.u32()? as usize,
        k: r.u32()? as usize,
    };
    if config.validate().is_err() {
        return Err(PersistError::Corrupt(format!("invalid header config {config:?}")));
    }
    let app_count = r.u64()?;
    let mut apps = BTreeMap::new();
    for _ in 0..app_count {
        let id_len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|e| PersistError::Corrupt(format!("app id not UTF-8: {e}")))?
            .to_string();
        let chunk_count = r.u32()? as usize;
        let mut chunks = Vec::with_capacity(chunk_count.min(1 << 16));
        for _ in 0..chunk_count {
            let mut values = Vec::with_capacity(config.dimension);
            for _ in 0..config.dimension {
                values.push(r.f64()?);
            }
            chunks.push(EmbeddingVector::new(values).map_err(|e| PersistError::Corrupt(e.to_string()))?);
        }
        apps.insert(id, chunks);
    }
    if r.pos != bytes.len() {
        return Err(PersistError::Corrupt("trailing bytes after index".into()));
    }
    Ok(VectorIndex { config, apps })
}
