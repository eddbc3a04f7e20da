//! Document embeddings: vector type, pluggable backends, corpus embedding
//! and the persistent cache.
//!
//! Every vector handed out by a backend is L2-normalized here, so cosine
//! similarity downstream reduces to a dot product.

mod cache;
mod hashed;
#[cfg(feature = "remote")]
mod remote;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::preprocess::Preprocessor;

pub use cache::{CacheError, CacheRecord, EmbeddingCache};
pub use hashed::{hashed_projection_embed, HashedEmbedder};
#[cfg(feature = "remote")]
pub use remote::{request_embeddings, EmbedRequest, EmbedResponse, RemoteEmbedder};

/// Tolerance on the Euclidean norm of a vector flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    ProtocolError(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("token projections cancelled to an all-zero vector")]
    DegenerateVector,
    #[error("cannot normalize an all-zero vector")]
    ZeroVector,
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("document '{id}': {source}")]
    Document {
        id: String,
        #[source]
        source: Box<EmbeddingError>,
    },
}

impl EmbeddingError {
    /// The underlying error, with any document annotation stripped.
    pub fn root(&self) -> &EmbeddingError {
        match self {
            EmbeddingError::Document { source, .. } => source.root(),
            other => other,
        }
    }

    fn for_document(self, id: &str) -> Self {
        match self {
            e @ EmbeddingError::Document { .. } => e,
            e => EmbeddingError::Document {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }
}

/// A fixed-dimension, finite, non-zero real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    normalized: bool,
}

fn check_values(values: &[f64]) -> Result<(), EmbeddingError> {
    if values.is_empty() {
        return Err(EmbeddingError::InvalidConfig(
            "dimension must be >= 1".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::NonFinite);
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(())
}

pub(crate) fn euclidean_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl EmbeddingVector {
    /// An unnormalized vector, kept as given.
    pub fn raw(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        check_values(&values)?;
        Ok(Self {
            values,
            normalized: false,
        })
    }

    /// Accepts values that are already unit length (e.g. reloaded from a
    /// cache) without rescaling them, so they stay bit-identical.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        check_values(&values)?;
        let norm = euclidean_norm(&values);
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(EmbeddingError::InvalidConfig(format!(
                "vector flagged normalized has norm {norm}"
            )));
        }
        Ok(Self {
            values,
            normalized: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Divides `values` by its Euclidean norm.
pub fn l2_normalize(values: &[f64]) -> Result<EmbeddingVector, EmbeddingError> {
    check_values(values)?;
    let norm = euclidean_norm(values);
    if !norm.is_finite() {
        // overflow in the sum of squares; rescale by the max magnitude first
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scaled: Vec<f64> = values.iter().map(|v| v / max).collect();
        return l2_normalize(&scaled);
    }
    Ok(EmbeddingVector {
        values: values.iter().map(|v| v / norm).collect(),
        normalized: true,
    })
}

/// A source of document vectors. Implementations return unit-length vectors
/// of exactly [`Embedder::dim`] entries, one per input text, in order.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifies (backend kind, model or seed, dimension). Cached vectors
    /// are only reused under an identical fingerprint.
    fn fingerprint(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| EmbeddingError::ProtocolError("backend returned no vector".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendConfig {
    Hashed {
        dim: usize,
        seed: u64,
    },
    Remote {
        endpoint: String,
        model_name: String,
        dim: usize,
        timeout: Duration,
    },
}

impl BackendConfig {
    pub fn dim(&self) -> usize {
        match self {
            BackendConfig::Hashed { dim, .. } | BackendConfig::Remote { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbeddingError> {
        match self {
            BackendConfig::Hashed { dim, seed } => Ok(Box::new(HashedEmbedder::new(*dim, *seed)?)),
            #[cfg(feature = "remote")]
            BackendConfig::Remote {
                endpoint,
                model_name,
                dim,
                timeout,
            } => Ok(Box::new(RemoteEmbedder::new(
                endpoint.clone(),
                model_name.clone(),
                *dim,
                *timeout,
            )?)),
            #[cfg(not(feature = "remote"))]
            BackendConfig::Remote { .. } => Err(EmbeddingError::InvalidConfig(
                "remote backend not compiled in".into(),
            )),
        }
    }
}

/// Vectors for a set of documents, stored row-major in one contiguous
/// buffer so the similarity kernel can scan them without pointer chasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    backend_fingerprint: String,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
    all_normalized: bool,
}

impl EmbeddingSet {
    pub fn new(dim: usize, backend_fingerprint: impl Into<String>) -> Self {
        Self {
            dim,
            backend_fingerprint: backend_fingerprint.into(),
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            norms: Vec::new(),
            all_normalized: true,
        }
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        vector: EmbeddingVector,
    ) -> Result<(), EmbeddingError> {
        let id = id.into();
        if vector.dim() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            }
            .for_document(&id));
        }
        if self.index.contains_key(&id) {
            return Err(EmbeddingError::InvalidConfig(format!(
                "duplicate id '{id}' in embedding set"
            )));
        }
        self.all_normalized &= vector.is_normalized();
        self.norms.push(vector.norm());
        self.data.extend_from_slice(vector.values());
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn backend_fingerprint(&self) -> &str {
        &self.backend_fingerprint
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn row_norm(&self, pos: usize) -> f64 {
        self.norms[pos]
    }

    /// True when every stored vector carries the unit-length flag.
    pub fn all_normalized(&self) -> bool {
        self.all_normalized
    }

    pub fn get(&self, id: &str) -> Option<EmbeddingVector> {
        let pos = self.position(id)?;
        Some(EmbeddingVector {
            values: self.row(pos).to_vec(),
            normalized: self.all_normalized || (self.norms[pos] - 1.0).abs() <= UNIT_NORM_TOLERANCE,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), self.row(i)))
    }
}

pub fn text_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedOptions {
    /// Texts per backend request.
    pub batch_size: usize,
    /// Maximum number of concurrent backend requests.
    pub parallelism: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: 16,
            parallelism: 4,
        }
    }
}

struct Pending {
    doc_pos: usize,
    sha: String,
    text: String,
}

/// Embeds every document of `corpus`, reusing cached vectors when the
/// backend fingerprint and text digest match. On failure no partial set is
/// returned; the error names the document involved.
///
/// Newly computed vectors are added to `cache` in corpus order, so the
/// cache contents do not depend on batching or thread scheduling.
pub fn embed_corpus(
    embedder: &dyn Embedder,
    corpus: &Corpus,
    preprocessor: &Preprocessor,
    cache: Option<&EmbeddingCache>,
    options: EmbedOptions,
) -> Result<EmbeddingSet, EmbeddingError> {
    let fingerprint = embedder.fingerprint();
    let dim = embedder.dim();
    let docs = corpus.documents();

    let mut resolved: Vec<Option<EmbeddingVector>> = vec![None; docs.len()];
    let mut pending = Vec::new();
    for (pos, doc) in docs.iter().enumerate() {
        let processed = preprocessor
            .preprocess(doc)
            .map_err(|_| EmbeddingError::EmptyText.for_document(&doc.id))?;
        let text = preprocessor.embedding_input(&processed);
        let sha = text_sha256(&text);
        match cache.and_then(|c| c.get(&fingerprint, &sha)) {
            Some(v) if v.dim() == dim => resolved[pos] = Some(v),
            _ => pending.push(Pending {
                doc_pos: pos,
                sha,
                text,
            }),
        }
    }

    let batches: Vec<&[Pending]> = pending.chunks(options.batch_size.max(1)).collect();
    let results = run_batches(embedder, &batches, options.parallelism.max(1));

    for (batch, result) in batches.iter().zip(results) {
        let vectors = result.map_err(|e| e.for_document(&docs[batch[0].doc_pos].id))?;
        if vectors.len() != batch.len() {
            return Err(EmbeddingError::ProtocolError(format!(
                "expected {} vectors, got {}",
                batch.len(),
                vectors.len()
            ))
            .for_document(&docs[batch[0].doc_pos].id));
        }
        for (item, vector) in batch.iter().zip(vectors) {
            if vector.dim() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: dim,
                    actual: vector.dim(),
                }
                .for_document(&docs[item.doc_pos].id));
            }
            resolved[item.doc_pos] = Some(vector);
        }
    }

    if let Some(cache) = cache {
        for item in &pending {
            if let Some(v) = &resolved[item.doc_pos] {
                cache.insert(&fingerprint, &item.sha, v.clone());
            }
        }
    }

    let mut set = EmbeddingSet::new(dim, fingerprint);
    for (doc, vector) in docs.iter().zip(resolved) {
        let vector = vector.expect("every document resolved or errored above");
        set.insert(doc.id.clone(), vector)?;
    }
    Ok(set)
}

/// Runs the batches on up to `parallelism` scoped threads; results come back
/// in batch order regardless of completion order.
fn run_batches(
    embedder: &dyn Embedder,
    batches: &[&[Pending]],
    parallelism: usize,
) -> Vec<Result<Vec<EmbeddingVector>, EmbeddingError>> {
    let call = |batch: &[Pending]| {
        let texts: Vec<String> = batch.iter().map(|p| p.text.clone()).collect();
        embedder.embed_batch(&texts)
    };
    let workers = parallelism.min(batches.len());
    if workers <= 1 || cfg!(target_arch = "wasm32") {
        return batches.iter().map(|b| call(b)).collect();
    }

    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<Vec<EmbeddingVector>, EmbeddingError>>> =
        (0..batches.len()).map(|_| None).collect();
    let finished: Vec<Vec<(usize, Result<_, _>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= batches.len() {
                            break;
                        }
                        done.push((i, call(batches[i])));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("embedding worker panicked"))
            .collect()
    });
    for (i, r) in finished.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots
        .into_iter()
        .map(|s| s.expect("every batch index is claimed exactly once"))
        .collect()
}
