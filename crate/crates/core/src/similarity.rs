//! Cosine similarity, pairwise matrices and filtered exact top-k search.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaseDocument, Corpus};
use crate::embedding::{EmbeddingSet, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unknown case id '{0}'")]
    UnknownId(String),
    #[error("no candidates remain after applying the filters")]
    EmptyCandidatePool,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid filters: {0}")]
    InvalidFilter(String),
}

/// A cosine score, clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        Self(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so `dot(a, b)` and `dot(b, a)` are bit-identical.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn cosine_raw(a: &[f64], a_norm: f64, b: &[f64], b_norm: f64, unit: bool) -> SimilarityScore {
    let d = dot(a, b);
    if unit {
        SimilarityScore::new(d)
    } else {
        SimilarityScore::new(d / (a_norm * b_norm))
    }
}

/// `A·B / (‖A‖‖B‖)`. When both vectors carry the unit-length flag the
/// denominator is skipped.
pub fn cosine_similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
) -> Result<SimilarityScore, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let unit = a.is_normalized() && b.is_normalized();
    Ok(cosine_raw(a.values(), a.norm(), b.values(), b.norm(), unit))
}

/// The full formula regardless of normalization flags.
pub fn cosine_full_formula(a: &[f64], b: &[f64]) -> Result<SimilarityScore, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    Ok(SimilarityScore::new(dot(a, b) / (na * nb)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityFilters {
    pub exclude_company_of_target: bool,
    pub exclude_same_sub_industry: bool,
    pub exclude_same_industry: bool,
    pub min_score: Option<f64>,
    pub allowed_years: Option<BTreeSet<i32>>,
    /// Explicit exclusions, applied to every query kind. For free-text
    /// queries these are the only company/industry exclusions.
    pub exclude_companies: Vec<String>,
    pub exclude_industries: Vec<String>,
    pub exclude_sub_industries: Vec<String>,
}

impl Default for SimilarityFilters {
    fn default() -> Self {
        Self {
            exclude_company_of_target: true,
            exclude_same_sub_industry: true,
            exclude_same_industry: false,
            min_score: None,
            allowed_years: None,
            exclude_companies: Vec::new(),
            exclude_industries: Vec::new(),
            exclude_sub_industries: Vec::new(),
        }
    }
}

impl SimilarityFilters {
    /// Nothing excluded except what a query kind always excludes.
    pub fn none() -> Self {
        Self {
            exclude_company_of_target: false,
            exclude_same_sub_industry: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimilarityError> {
        if let Some(m) = self.min_score {
            if !(-1.0..=1.0).contains(&m) {
                return Err(SimilarityError::InvalidFilter(format!(
                    "min_score {m} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    fn passes_explicit(&self, doc: &CaseDocument) -> bool {
        !self.exclude_companies.contains(&doc.company)
            && !self.exclude_industries.contains(&doc.industry)
            && !self.exclude_sub_industries.contains(&doc.sub_industry)
            && self
                .allowed_years
                .as_ref()
                .is_none_or(|years| years.contains(&doc.year))
    }

    /// Metadata eligibility of `candidate` relative to `target` (score
    /// threshold excluded).
    pub fn admits(&self, target: Option<&CaseDocument>, candidate: &CaseDocument) -> bool {
        if let Some(t) = target {
            if t.id == candidate.id
                || (self.exclude_company_of_target && t.company == candidate.company)
                || (self.exclude_same_sub_industry && t.sub_industry == candidate.sub_industry)
                || (self.exclude_same_industry && t.industry == candidate.industry)
            {
                return false;
            }
        }
        self.passes_explicit(candidate)
    }

    pub fn admits_score(&self, score: SimilarityScore) -> bool {
        self.min_score.is_none_or(|m| score.value() >= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub doc_id: String,
    pub score: SimilarityScore,
    pub rank: usize,
}

/// Descending score, then ascending id.
fn rank_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

struct Query<'a> {
    values: &'a [f64],
    norm: f64,
    normalized: bool,
}

fn rank(
    query: Query<'_>,
    set: &EmbeddingSet,
    corpus: &Corpus,
    target: Option<&CaseDocument>,
    filters: &SimilarityFilters,
    k: usize,
) -> Result<Vec<RankedMatch>, SimilarityError> {
    let unit = query.normalized && set.all_normalized();
    let docs = corpus.documents();
    let mut scored: Vec<(f64, &str)> = Vec::new();
    for (pos, id) in set.ids().iter().enumerate() {
        let Some(doc_pos) = corpus.position(id) else {
            continue;
        };
        if !filters.admits(target, &docs[doc_pos]) {
            continue;
        }
        let score = cosine_raw(
            query.values,
            query.norm,
            set.row(pos),
            set.row_norm(pos),
            unit,
        );
        if filters.admits_score(score) {
            scored.push((score.value(), id.as_str()));
        }
    }
    if scored.is_empty() {
        return Err(SimilarityError::EmptyCandidatePool);
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, id))| RankedMatch {
            doc_id: id.to_string(),
            score: SimilarityScore(score),
            rank: i + 1,
        })
        .collect())
}

/// The `k` eligible documents most similar to `target_id`.
pub fn top_k_similar(
    target_id: &str,
    set: &EmbeddingSet,
    corpus: &Corpus,
    filters: &SimilarityFilters,
    k: usize,
) -> Result<Vec<RankedMatch>, SimilarityError> {
    if k == 0 {
        return Err(SimilarityError::InvalidK);
    }
    filters.validate()?;
    let target = corpus
        .get_case(target_id)
        .map_err(|_| SimilarityError::UnknownId(target_id.to_string()))?;
    let pos = set
        .position(target_id)
        .ok_or_else(|| SimilarityError::UnknownId(target_id.to_string()))?;
    let query = Query {
        values: set.row(pos),
        norm: set.row_norm(pos),
        normalized: set.all_normalized(),
    };
    rank(query, set, corpus, Some(target), filters, k)
}

/// Top-k for an ad-hoc query vector. Nothing is excluded implicitly; only
/// the explicit lists, year set and score threshold of `filters` apply.
pub fn top_k_for_text(
    query_vector: &EmbeddingVector,
    set: &EmbeddingSet,
    corpus: &Corpus,
    filters: &SimilarityFilters,
    k: usize,
) -> Result<Vec<RankedMatch>, SimilarityError> {
    if k == 0 {
        return Err(SimilarityError::InvalidK);
    }
    filters.validate()?;
    if query_vector.dim() != set.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: query_vector.dim(),
            right: set.dim(),
        });
    }
    let query = Query {
        values: query_vector.values(),
        norm: query_vector.norm(),
        normalized: query_vector.is_normalized(),
    };
    rank(query, set, corpus, None, filters, k)
}

/// Dense symmetric matrix of pairwise scores, rows in set order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub ids: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.ids.iter().position(|x| x == a)?;
        let j = self.ids.iter().position(|x| x == b)?;
        Some(self.scores[i][j])
    }
}

/// Computes the upper triangle and mirrors it, so the result is exactly
/// symmetric.
#[allow(clippy::needless_range_loop)]
pub fn similarity_matrix(set: &EmbeddingSet) -> SimilarityMatrix {
    let n = set.len();
    let unit = set.all_normalized();
    let mut scores = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s = cosine_raw(
                set.row(i),
                set.row_norm(i),
                set.row(j),
                set.row_norm(j),
                unit,
            )
            .value();
            scores[i][j] = s;
            scores[j][i] = s;
        }
    }
    SimilarityMatrix {
        ids: set.ids().to_vec(),
        scores,
    }
}
