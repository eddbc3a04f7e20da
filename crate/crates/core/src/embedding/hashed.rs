//! Deterministic hashed-projection embedder.
//!
//! Each distinct token seeds a SplitMix64 stream with
//! `xxh3_64(token, seed)`; the top bit of each of the first `dim` draws
//! gives a ±1 sign vector. A document vector is the count-weighted sum of
//! its tokens' sign vectors, L2-normalized. Integer accumulation keeps the
//! result independent of token order and platform.

use std::collections::BTreeMap;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{l2_normalize, Embedder, EmbeddingError, EmbeddingVector};
use crate::preprocess::{tokenize, TokenSequence};

fn accumulate_signs(acc: &mut [i64], token: &str, count: i64, seed: u64) {
    let mut rng = SplitMix64::seed_from_u64(xxh3_64_with_seed(token.as_bytes(), seed));
    for slot in acc.iter_mut() {
        if rng.next_u64() >> 63 == 1 {
            *slot += count;
        } else {
            *slot -= count;
        }
    }
}

pub fn hashed_projection_embed(
    tokens: &TokenSequence,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingVector, EmbeddingError> {
    if dim < 2 {
        return Err(EmbeddingError::InvalidConfig(format!(
            "hashed embedder needs dim >= 2, got {dim}"
        )));
    }
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in tokens.iter() {
        *counts.entry(t).or_default() += 1;
    }
    let mut acc = vec![0i64; dim];
    for (token, count) in counts {
        accumulate_signs(&mut acc, token, count, seed);
    }
    if acc.iter().all(|&v| v == 0) {
        return Err(EmbeddingError::DegenerateVector);
    }
    let values: Vec<f64> = acc.into_iter().map(|v| v as f64).collect();
    l2_normalize(&values)
}

/// Embeds text by whitespace/script tokenization followed by
/// [`hashed_projection_embed`]. Input is expected to be normalized already.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidConfig(format!(
                "hashed embedder needs dim >= 2, got {dim}"
            )));
        }
        Ok(Self { dim, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("hashed:seed={}:dim={}", self.seed, self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts
            .iter()
            .map(|t| hashed_projection_embed(&tokenize(t), self.dim, self.seed))
            .collect()
    }
}
