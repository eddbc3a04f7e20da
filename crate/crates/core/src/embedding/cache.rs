//! Persistent embedding cache keyed by (backend fingerprint, SHA-256 of the
//! exact text sent to the backend).
//!
//! File format: one JSON object per line,
//! `{"fingerprint": "...", "text_sha256": "...", "dim": N, "values": [...]}`.
//! Records are written in insertion order, so saving an unchanged cache
//! reproduces the same bytes.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub fingerprint: String,
    pub text_sha256: String,
    pub dim: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

type Key = (String, String);

#[derive(Debug, Default)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: RwLock<IndexMap<Key, EmbeddingVector>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; a missing file yields an empty cache bound
    /// to that path.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let entries = match fs::File::open(&path) {
            Ok(file) => Self::read_records(BufReader::new(file)).map_err(|e| match e {
                CacheError::Io { source, .. } => CacheError::Io {
                    path: path.clone(),
                    source,
                },
                other => other,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => IndexMap::new(),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        Ok(Self {
            path: Some(path),
            entries: RwLock::new(entries),
        })
    }

    fn read_records(reader: impl BufRead) -> Result<IndexMap<Key, EmbeddingVector>, CacheError> {
        let mut entries = IndexMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| CacheError::Io {
                path: PathBuf::new(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| CacheError::Malformed {
                line: idx + 1,
                reason,
            };
            let record: CacheRecord =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            if record.values.len() != record.dim {
                return Err(malformed(format!(
                    "dim {} but {} values",
                    record.dim,
                    record.values.len()
                )));
            }
            let vector =
                EmbeddingVector::from_unit(record.values).map_err(|e| malformed(e.to_string()))?;
            entries.insert((record.fingerprint, record.text_sha256), vector);
        }
        Ok(entries)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, fingerprint: &str, text_sha256: &str) -> Option<EmbeddingVector> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .get(&(fingerprint.to_string(), text_sha256.to_string()))
            .cloned()
    }

    pub fn insert(&self, fingerprint: &str, text_sha256: &str, vector: EmbeddingVector) {
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert((fingerprint.to_string(), text_sha256.to_string()), vector);
    }

    pub fn records(&self) -> Vec<CacheRecord> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .iter()
            .map(|((fp, sha), v)| CacheRecord {
                fingerprint: fp.clone(),
                text_sha256: sha.clone(),
                dim: v.dim(),
                values: v.values().to_vec(),
            })
            .collect()
    }

    /// Rewrites the bound file. No-op for in-memory caches.
    pub fn save(&self) -> Result<(), CacheError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let io_err = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        // hold the write lock so concurrent inserts cannot interleave
        let entries = self.entries.write().expect("cache lock poisoned");
        let tmp = path.with_extension("tmp");
        {
            let mut out = BufWriter::new(fs::File::create(&tmp).map_err(io_err)?);
            for ((fp, sha), v) in entries.iter() {
                let record = CacheRecord {
                    fingerprint: fp.clone(),
                    text_sha256: sha.clone(),
                    dim: v.dim(),
                    values: v.values().to_vec(),
                };
                let line = serde_json::to_string(&record).expect("cache record serializes");
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
        fs::rename(&tmp, path).map_err(io_err)
    }
}
