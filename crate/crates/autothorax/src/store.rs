//! Binary vector store.
//!
//! Little-endian layout:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `FVSTORE1` |
//! | 8 | 4 | version (1) |
//! | 12 | 4 | count |
//! | 16 | 4 | dim |
//! | 20 | 1 | config tag (1 = C1, 2 = C2, 3 = C3, 4 = encoded) |
//! | 21 | 3 | zero padding |
//! | 24 | 4 | id table length in bytes |
//! | 28 | 4 | extractor id length in bytes |
//! | 32 | 4·count·dim | f32 values, row-major |
//!
//! followed by the ids, each terminated by `\n`, then the UTF-8 extractor id.

use std::fs;
use std::path::Path;

use autothorax_core::data::{FeatureConfig, FeatureVector};

use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"FVSTORE1";
pub const STORE_VERSION: u32 = 1;
pub const STORE_HEADER_LEN: usize = 32;

fn store_err(msg: impl Into<String>) -> Error {
    Error::Store(msg.into())
}

/// Serialize vectors that share one width, configuration and extractor.
pub fn encode_store(vectors: &[FeatureVector]) -> Result<Vec<u8>> {
    let (dim, config, extractor) = match vectors.first() {
        Some(v) => (v.dim(), v.config, v.extractor_id.as_str()),
        None => return Err(store_err("cannot write an empty store")),
    };
    let mut ids = Vec::new();
    for v in vectors {
        if v.dim() != dim {
            return Err(store_err(format!(
                "vector `{}` has dim {}, store dim is {dim}",
                v.record_id,
                v.dim()
            )));
        }
        if v.config != config || v.extractor_id != extractor {
            return Err(store_err(format!(
                "vector `{}` differs in configuration or extractor from the first vector",
                v.record_id
            )));
        }
        if v.record_id.is_empty() || v.record_id.contains('\n') {
            return Err(store_err(format!("id {:?} cannot be stored", v.record_id)));
        }
        ids.extend_from_slice(v.record_id.as_bytes());
        ids.push(b'\n');
    }
    let u32_field = |n: usize, what: &str| u32::try_from(n).map_err(|_| store_err(format!("{what} {n} exceeds u32")));
    let mut out = Vec::with_capacity(STORE_HEADER_LEN + vectors.len() * dim * 4 + ids.len() + extractor.len());
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    out.extend_from_slice(&u32_field(vectors.len(), "count")?.to_le_bytes());
    out.extend_from_slice(&u32_field(dim, "dim")?.to_le_bytes());
    out.push(config.tag());
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&u32_field(ids.len(), "id table length")?.to_le_bytes());
    out.extend_from_slice(&u32_field(extractor.len(), "extractor id length")?.to_le_bytes());
    for v in vectors {
        for x in &v.values {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.extend_from_slice(&ids);
    out.extend_from_slice(extractor.as_bytes());
    Ok(out)
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Header fields of a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub count: usize,
    pub dim: usize,
    pub config: FeatureConfig,
    pub id_table_len: usize,
    pub extractor_len: usize,
}

impl StoreHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < STORE_HEADER_LEN {
            return Err(store_err(format!(
                "truncated header: {} of {STORE_HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if &bytes[..8] != STORE_MAGIC {
            return Err(store_err("bad magic, not a vector store"));
        }
        let version = le_u32(bytes, 8);
        if version != STORE_VERSION {
            return Err(store_err(format!("unsupported version {version}")));
        }
        let config =
            FeatureConfig::from_tag(bytes[20]).ok_or_else(|| store_err(format!("unknown config tag {}", bytes[20])))?;
        if bytes[21..24] != [0; 3] {
            return Err(store_err("nonzero header padding"));
        }
        Ok(Self {
            count: le_u32(bytes, 12) as usize,
            dim: le_u32(bytes, 16) as usize,
            config,
            id_table_len: le_u32(bytes, 24) as usize,
            extractor_len: le_u32(bytes, 28) as usize,
        })
    }

    /// Total file size implied by the header.
    pub fn file_len(&self) -> Option<usize> {
        self.count
            .checked_mul(self.dim)?
            .checked_mul(4)?
            .checked_add(STORE_HEADER_LEN + self.id_table_len)?
            .checked_add(self.extractor_len)
    }
}

pub fn decode_store(bytes: &[u8]) -> Result<Vec<FeatureVector>> {
    let h = StoreHeader::parse(bytes)?;
    let expected = h.file_len().ok_or_else(|| store_err("header sizes overflow"))?;
    if bytes.len() < expected {
        return Err(store_err(format!("truncated: {} of {expected} bytes", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(store_err(format!("{} trailing bytes", bytes.len() - expected)));
    }
    if h.count > 0 && h.dim == 0 {
        return Err(store_err("zero dim"));
    }
    let data_end = STORE_HEADER_LEN + h.count * h.dim * 4;
    let ids_end = data_end + h.id_table_len;
    let ids = std::str::from_utf8(&bytes[data_end..ids_end]).map_err(|_| store_err("id table is not UTF-8"))?;
    let extractor = std::str::from_utf8(&bytes[ids_end..]).map_err(|_| store_err("extractor id is not UTF-8"))?;
    let ids: Vec<&str> = match ids.strip_suffix('\n') {
        Some(body) => body.split('\n').collect(),
        None if ids.is_empty() => Vec::new(),
        None => return Err(store_err("id table is not newline-terminated")),
    };
    if ids.len() != h.count {
        return Err(store_err(format!("{} ids for {} rows", ids.len(), h.count)));
    }
    let data = &bytes[STORE_HEADER_LEN..data_end];
    ids.iter()
        .enumerate()
        .map(|(row, id)| {
            let values = data[row * h.dim * 4..(row + 1) * h.dim * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            FeatureVector::new(*id, values, h.config, extractor).map_err(Error::from)
        })
        .collect()
}

pub fn write_store(vectors: &[FeatureVector], path: &Path) -> Result<()> {
    crate::write_file(path, &encode_store(vectors)?)
}

pub fn read_store(path: &Path) -> Result<Vec<FeatureVector>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing {
            what: "vector store",
            path: path.to_path_buf(),
        },
        _ => Error::io(path, e),
    })?;
    decode_store(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs() -> Vec<FeatureVector> {
        vec![
            FeatureVector::new("a", vec![1.0, -2.0, 0.5, 3.0], FeatureConfig::C1, "x").unwrap(),
            FeatureVector::new("b", vec![0.0, 1e-30, -0.0, 7.25], FeatureConfig::C1, "x").unwrap(),
        ]
    }

    #[test]
    fn layout() {
        let bytes = encode_store(&vecs()).unwrap();
        assert_eq!(bytes.len(), 32 + 32 + 4 + 1);
        assert_eq!(&bytes[..8], b"FVSTORE1");
        assert_eq!(bytes[20], 1);
        assert_eq!(&bytes[64..68], b"a\nb\n");
        let back = decode_store(&bytes).unwrap();
        assert_eq!(back, vecs());
        assert_eq!(back[1].values[2].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn corruption() {
        let bytes = encode_store(&vecs()).unwrap();
        assert!(decode_store(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_store(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_store(&magic).is_err());
        let mut version = bytes.clone();
        version[8] = 2;
        assert!(decode_store(&version).is_err());
        let mut mixed = vecs();
        mixed[1].values.push(1.0);
        assert!(encode_store(&mixed).is_err());
    }
}
