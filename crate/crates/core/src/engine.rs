//! The composed pipeline: corpus + embeddings + term index, answering
//! target-case queries, what-if text queries and pairwise overlaps.
//!
//! The engine is immutable once built. Queries never modify it, so it can be
//! shared across threads behind an `Arc`.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::analysis::{AnalysisError, FeatureOverlap, TermIndex};
use crate::corpus::Corpus;
use crate::embedding::{
    embed_corpus, EmbedOptions, Embedder, EmbeddingCache, EmbeddingError, EmbeddingSet,
};
use crate::preprocess::{PreprocessError, Preprocessor};
use crate::report::{build_report, AnalysisReport, ReportContext, ReportError, ReportTarget};
use crate::similarity::{
    top_k_for_text, top_k_similar, RankedMatch, SimilarityError, SimilarityFilters,
};

/// Matches selected per query unless told otherwise: a target company A and
/// two reference companies B and C.
pub const DEFAULT_K: usize = 2;
/// Common-feature terms listed per match.
pub const DEFAULT_FEATURE_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown case id '{0}'")]
    UnknownId(String),
    #[error("no eligible matches: every candidate was excluded by the filters")]
    EmptyCandidatePool,
    #[error("query text is empty after preprocessing")]
    EmptyText,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Preprocess(PreprocessError),
    #[error(transparent)]
    Report(ReportError),
}

impl From<SimilarityError> for EngineError {
    fn from(e: SimilarityError) -> Self {
        match e {
            SimilarityError::UnknownId(id) => EngineError::UnknownId(id),
            SimilarityError::EmptyCandidatePool => EngineError::EmptyCandidatePool,
            other => EngineError::InvalidRequest(other.to_string()),
        }
    }
}

impl From<AnalysisError> for EngineError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::UnknownId(id) => EngineError::UnknownId(id),
            other => EngineError::InvalidRequest(other.to_string()),
        }
    }
}

impl From<ReportError> for EngineError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::UnknownId(id) => EngineError::UnknownId(id),
            other => EngineError::Report(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub embed: EmbedOptions,
    /// Mine adjacent-token bigrams as additional feature terms.
    pub bigrams: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            embed: EmbedOptions::default(),
            bigrams: true,
        }
    }
}

pub struct Engine {
    corpus: Corpus,
    preprocessor: Preprocessor,
    embedder: Arc<dyn Embedder>,
    embeddings: EmbeddingSet,
    terms: TermIndex,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("corpus_size", &self.corpus.len())
            .field("backend", &self.embeddings.backend_fingerprint())
            .finish()
    }
}

impl Engine {
    /// Embeds the corpus (through `cache` when given) and builds the term
    /// index.
    pub fn build(
        corpus: Corpus,
        preprocessor: Preprocessor,
        embedder: Arc<dyn Embedder>,
        cache: Option<&EmbeddingCache>,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let embeddings = embed_corpus(
            embedder.as_ref(),
            &corpus,
            &preprocessor,
            cache,
            options.embed,
        )?;
        let terms = TermIndex::build(&corpus, &preprocessor, options.bigrams)
            .map_err(EngineError::Preprocess)?;
        Ok(Self {
            corpus,
            preprocessor,
            embedder,
            embeddings,
            terms,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn embeddings(&self) -> &EmbeddingSet {
        &self.embeddings
    }

    pub fn terms(&self) -> &TermIndex {
        &self.terms
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn top_k(
        &self,
        target_id: &str,
        k: usize,
        filters: &SimilarityFilters,
    ) -> Result<Vec<RankedMatch>, EngineError> {
        Ok(top_k_similar(
            target_id,
            &self.embeddings,
            &self.corpus,
            filters,
            k,
        )?)
    }

    /// Ranked cross-domain matches for a corpus case, with per-pair and
    /// all-way common features.
    pub fn similar(
        &self,
        target_id: &str,
        k: usize,
        filters: &SimilarityFilters,
        feature_count: usize,
        generated_at: DateTime<Utc>,
    ) -> Result<AnalysisReport, EngineError> {
        let target = self
            .corpus
            .get_case(target_id)
            .map_err(|_| EngineError::UnknownId(target_id.to_string()))?;
        let matches = self.top_k(target_id, k, filters)?;
        let overlaps = matches
            .iter()
            .map(|m| {
                self.terms
                    .common_features(target_id, &m.doc_id, feature_count)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut group: Vec<&str> = vec![target_id];
        group.extend(matches.iter().map(|m| m.doc_id.as_str()));
        let common_to_all = self.terms.shared_by_all(&group, feature_count)?;
        Ok(build_report(
            ReportTarget::from_case(target),
            &matches,
            &overlaps,
            &common_to_all,
            &self.corpus,
            self.context(filters, generated_at),
        )?)
    }

    /// Ranks the corpus against free text. The text is embedded with the
    /// same preprocessing as the corpus and is not retained.
    pub fn what_if(
        &self,
        text: &str,
        k: usize,
        filters: &SimilarityFilters,
        feature_count: usize,
        generated_at: DateTime<Utc>,
    ) -> Result<AnalysisReport, EngineError> {
        let target = ReportTarget::what_if();
        let processed = self
            .preprocessor
            .process_text(&target.id, text)
            .map_err(|_| EngineError::EmptyText)?;
        let input = self.preprocessor.embedding_input(&processed);
        let query = self.embedder.embed_text(&input).map_err(|e| match e {
            EmbeddingError::EmptyText => EngineError::EmptyText,
            other => EngineError::Embedding(other),
        })?;
        let matches = top_k_for_text(&query, &self.embeddings, &self.corpus, filters, k)?;

        let query_terms = self
            .terms
            .terms_for(&processed, &self.preprocessor.stopwords);
        let overlaps = matches
            .iter()
            .map(|m| {
                self.terms
                    .common_features_with(&target.id, &query_terms, &m.doc_id, feature_count)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut group = vec![&query_terms];
        for m in &matches {
            group.push(self.terms.doc_terms(&m.doc_id)?);
        }
        let common_to_all = self.terms.shared_among(&group, feature_count);
        Ok(build_report(
            target,
            &matches,
            &overlaps,
            &common_to_all,
            &self.corpus,
            self.context(filters, generated_at),
        )?)
    }

    pub fn common_features(
        &self,
        a: &str,
        b: &str,
        n: usize,
    ) -> Result<FeatureOverlap, EngineError> {
        Ok(self.terms.common_features(a, b, n)?)
    }

    fn context(&self, filters: &SimilarityFilters, generated_at: DateTime<Utc>) -> ReportContext {
        ReportContext {
            filters: filters.clone(),
            backend_fingerprint: self.embeddings.backend_fingerprint().to_string(),
            generated_at,
        }
    }
}
