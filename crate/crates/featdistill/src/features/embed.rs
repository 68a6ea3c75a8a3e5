//! Precomputed-embedding files: bit-exact, streamable, language-neutral.
//!
//! Layout (all integers little-endian): magic `FDEB`, version u16, tokens
//! u32, dim u32, row count u64, then per row an id-length u16, the UTF-8 id,
//! and tokens×dim IEEE-754 binary32 values. Rows are written in id order so
//! equal maps produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMap;

const MAGIC: &[u8; 4] = b"FDEB";
const VERSION: u16 = 1;

/// In-memory embedding table: T×D binary32 rows keyed by item id.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    tokens: usize,
    dim: usize,
    rows: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(tokens: usize, dim: usize, rows: BTreeMap<String, Vec<f32>>) -> Result<Self> {
        if tokens == 0 || dim == 0 {
            return Err(Error::invalid("embedding store needs tokens >= 1 and dim >= 1"));
        }
        for (id, row) in &rows {
            if id.is_empty() {
                return Err(Error::invalid("embedding row id must be nonempty"));
            }
            if row.len() != tokens * dim {
                return Err(Error::shape(format!(
                    "row '{id}' has {} values, expected {tokens}x{dim}",
                    row.len()
                )));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("row '{id}' contains non-finite values")));
            }
        }
        Ok(Self { tokens, dim, rows })
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(|r| r.as_slice())
    }

    pub fn rows(&self) -> &BTreeMap<String, Vec<f32>> {
        &self.rows
    }

    /// Stored row widened to f64 (exact) as a FeatureMap.
    pub fn feature_map(&self, id: &str) -> Result<FeatureMap> {
        let row = self
            .rows
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("embedding id '{id}'")))?;
        FeatureMap::new(self.tokens, self.dim, row.iter().map(|v| *v as f64).collect())
    }
}

/// Serialize a store; `load_embeddings` restores it bit-exactly.
pub fn write_embeddings(path: &Path, store: &EmbeddingStore) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.tokens as u32).to_le_bytes());
    out.extend_from_slice(&(store.dim as u32).to_le_bytes());
    out.extend_from_slice(&(store.rows.len() as u64).to_le_bytes());
    for (id, row) in &store.rows {
        let id_bytes = id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(Error::invalid(format!("embedding id longer than {} bytes", u16::MAX)));
        }
        out.extend_from_slice(&(id_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(id_bytes);
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("embedding file truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format(format!("{}: not an embedding file", path.display())));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported embedding file version {version}")));
    }
    let tokens = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if tokens == 0 || dim == 0 {
        return Err(Error::Format("embedding file declares zero tokens or dim".into()));
    }
    let count = r.u64()?;
    let mut rows = BTreeMap::new();
    for _ in 0..count {
        let id_len = r.u16()? as usize;
        let id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| Error::Format("embedding id is not UTF-8".into()))?
            .to_string();
        let mut row = Vec::with_capacity(tokens * dim);
        for chunk in r.take(tokens * dim * 4)?.chunks_exact(4) {
            row.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        if rows.insert(id.clone(), row).is_some() {
            return Err(Error::Format(format!("duplicate embedding id '{id}'")));
        }
    }
    if r.pos != buf.len() {
        return Err(Error::Format("trailing bytes after last embedding row".into()));
    }
    EmbeddingStore::new(tokens, dim, rows)
}
