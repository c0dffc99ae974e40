//! Named-tensor checkpoint container.
//!
//! Byte layout:
//!
//! | offset      | size | content                                         |
//! |-------------|------|-------------------------------------------------|
//! | 0           | 8    | magic `IRONYCK1`                                |
//! | 8           | 8    | header length `H`, little-endian `u64`          |
//! | 16          | H    | UTF-8 JSON header                               |
//! | 16 + H      | ...  | tensor data, little-endian IEEE-754 `f32`       |
//!
//! The header is `{"meta": <any JSON>, "entries": [...]}` where each entry is
//! `{"name", "shape", "dtype": "f32", "len", "offset", "trainable"}`. `offset`
//! is in bytes from the start of the data section; entries are contiguous,
//! in manifest order, row-major, and `len` equals the product of `shape`.
//! The data section ends exactly after the last entry.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"IRONYCK1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub len: usize,
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub entries: Vec<ManifestEntry>,
    data: Vec<f32>,
}

/// Serializes one or more stores; each entry name is prefixed with its
/// store's prefix.
pub fn encode(stores: &[(&str, &ParamStore)], meta: &serde_json::Value) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut data: Vec<u8> = Vec::new();
    for (prefix, store) in stores {
        for p in store.iter() {
            entries.push(ManifestEntry {
                name: format!("{prefix}{}", p.name),
                shape: p.value.shape().to_vec(),
                dtype: "f32".into(),
                len: p.value.len(),
                offset: data.len(),
                trainable: p.trainable,
            });
            for &v in p.value.data() {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let header = serde_json::to_vec(&Header {
        meta: meta.clone(),
        entries,
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&data);
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("missing magic number"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if hlen > body.len() {
        return Err(corrupt("header extends past end of file"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])
        .map_err(|e| Error::CorruptCheckpoint(format!("bad header: {e}")))?;
    let raw = &body[hlen..];
    let mut expected_offset = 0;
    for e in &header.entries {
        if e.dtype != "f32" {
            return Err(Error::CorruptCheckpoint(format!(
                "entry {:?} has unsupported dtype {:?}",
                e.name, e.dtype
            )));
        }
        let product: usize = e.shape.iter().product();
        if product != e.len {
            return Err(Error::ShapeManifestMismatch {
                name: e.name.clone(),
                expected: vec![e.len],
                found: e.shape.clone(),
            });
        }
        if e.offset != expected_offset {
            return Err(Error::CorruptCheckpoint(format!(
                "entry {:?} at offset {} but expected {expected_offset}",
                e.name, e.offset
            )));
        }
        expected_offset += 4 * e.len;
    }
    if raw.len() != expected_offset {
        return Err(Error::CorruptCheckpoint(format!(
            "data section holds {} bytes, manifest declares {expected_offset}",
            raw.len()
        )));
    }
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Checkpoint {
        meta: header.meta,
        entries: header.entries,
        data,
    })
}

impl Checkpoint {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        decode(&bytes)
    }

    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn values(&self, e: &ManifestEntry) -> &[f32] {
        &self.data[e.offset / 4..e.offset / 4 + e.len]
    }

    /// Copies `prefix + name` entries into every parameter of `store`,
    /// checking shapes against the store's layout.
    pub fn load_into(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        for p in store.iter_mut() {
            let name = format!("{prefix}{}", p.name);
            let e = self
                .entry(&name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing entry {name:?}")))?;
            if e.shape != p.value.shape() {
                return Err(Error::ShapeManifestMismatch {
                    name,
                    expected: p.value.shape().to_vec(),
                    found: e.shape.clone(),
                });
            }
            let vals: Vec<f64> = self.values(e).iter().map(|&v| v as f64).collect();
            p.value = Tensor::from_vec(&e.shape, vals)?;
        }
        Ok(())
    }
}

pub fn write(path: &Path, stores: &[(&str, &ParamStore)], meta: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(stores, meta)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a", Tensor::from_vec(&[2, 3], vec![1.0, -2.5, 3.25, 0.1, 0.2, 1e-3]).unwrap(), true)
            .unwrap();
        s.add("b", Tensor::vector(vec![7.0]), false).unwrap();
        s
    }

    #[test]
    fn layout_is_as_documented() {
        let s = store();
        let bytes = encode(&[("m.", &s)], &json!({"k": 1}));
        assert_eq!(&bytes[..8], b"IRONYCK1");
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let data = &bytes[16 + hlen..];
        assert_eq!(data.len(), 4 * 7);
        assert_eq!(f32::from_le_bytes(data[4..8].try_into().unwrap()), -2.5);
        assert_eq!(f32::from_le_bytes(data[24..28].try_into().unwrap()), 7.0);
        let ck = decode(&bytes).unwrap();
        assert_eq!(ck.entries[1].name, "m.b");
        assert_eq!(ck.entries[1].offset, 24);
        assert!(!ck.entries[1].trainable);
    }

    #[test]
    fn round_trip_is_byte_equal() {
        let mut s = store();
        let bytes = encode(&[("", &s)], &json!(null));
        let ck = decode(&bytes).unwrap();
        s.iter_mut().for_each(|p| p.value.fill(0.0));
        ck.load_into("", &mut s).unwrap();
        assert_eq!(encode(&[("", &s)], &json!(null)), bytes);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = encode(&[("", &store())], &json!(null));
        for cut in [3, 12, 20, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut {cut}");
        }
    }

    fn replace_bytes(bytes: &[u8], from: &str, to: &str) -> Vec<u8> {
        assert_eq!(from.len(), to.len());
        let pos = bytes
            .windows(from.len())
            .position(|w| w == from.as_bytes())
            .unwrap();
        let mut out = bytes.to_vec();
        out[pos..pos + to.len()].copy_from_slice(to.as_bytes());
        out
    }

    #[test]
    fn edited_shape_is_detected() {
        let bytes = encode(&[("", &store())], &json!(null));
        // same element count, transposed shape
        let edited = replace_bytes(&bytes, "\"shape\":[2,3]", "\"shape\":[3,2]");
        let ck = decode(&edited).unwrap();
        let mut s = store();
        assert!(matches!(ck.load_into("", &mut s), Err(Error::ShapeManifestMismatch { .. })));
        // element count no longer matching len
        let edited = replace_bytes(&bytes, "\"shape\":[2,3]", "\"shape\":[2,4]");
        assert!(matches!(decode(&edited), Err(Error::ShapeManifestMismatch { .. })));
    }
}
