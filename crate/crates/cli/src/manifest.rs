//! Run manifests: the resolved configuration, content hashes of every input
//! and output, and the metrics a run produced. A manifest is enough to
//! replay the run and check that it reproduces bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::Command;
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Hex SHA-256 over `blob <len>\0<bytes>`, the object hash git uses in its
/// SHA-256 repository format.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Files hash as blobs. Directories hash as a sorted listing of
/// `relative-path\0blob-hash\n` lines, recursively.
pub fn content_hash(path: &Path) -> Result<String, CliError> {
    let meta = fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    if meta.is_file() {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        return Ok(blob_hash(&bytes));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut listing = String::new();
    for rel in files {
        let bytes = fs::read(path.join(&rel)).map_err(|e| CliError::io(path.join(&rel), e))?;
        listing.push_str(&format!("{}\0{}\n", rel, blob_hash(&bytes)));
    }
    Ok(blob_hash(listing.as_bytes()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("child of root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub command: Command,
    pub seed: u64,
    /// Every configuration key with its effective value.
    pub config: Vec<(String, String)>,
    pub inputs: Vec<InputRecord>,
    /// Output name (file name, or path relative to an output directory) to
    /// content hash. Standard output is recorded as `<stdout>`.
    pub outputs: BTreeMap<String, String>,
    pub metrics: serde_json::Value,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(irony_core::Error::from)?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text).map_err(irony_core::Error::from)?)
    }

    /// Describes every difference in outputs or metrics from `other`.
    pub fn differences(&self, other: &Manifest) -> Vec<String> {
        let mut diffs = Vec::new();
        let names: std::collections::BTreeSet<&String> =
            self.outputs.keys().chain(other.outputs.keys()).collect();
        for name in names {
            let (a, b) = (self.outputs.get(name), other.outputs.get(name));
            if a != b {
                diffs.push(format!("output {name}: recorded {a:?}, replayed {b:?}"));
            }
        }
        if self.metrics != other.metrics {
            diffs.push(format!(
                "metrics differ: recorded {}, replayed {}",
                self.metrics, other.metrics
            ));
        }
        diffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_format() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            blob_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }
}
