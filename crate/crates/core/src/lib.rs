//! Cross-domain case similarity engine.
//!
//! Case documents are normalized, embedded into unit vectors, ranked by
//! cosine similarity with same-company and same-domain exclusions, and
//! paired with the salient terms they share. See [`engine::Engine`] for the
//! composed pipeline.

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod engine;
pub mod preprocess;
pub mod report;
pub mod similarity;

pub use analysis::{FeatureOverlap, TermIndex, TermWeight};
pub use corpus::{ingest_corpus, CaseDocument, CaseSummary, Corpus, CorpusError, CorpusFormat};
pub use embedding::{
    embed_corpus, l2_normalize, BackendConfig, EmbedOptions, Embedder, EmbeddingCache,
    EmbeddingError, EmbeddingSet, EmbeddingVector, HashedEmbedder,
};
pub use engine::{Engine, EngineError, EngineOptions, DEFAULT_FEATURE_COUNT, DEFAULT_K};
pub use preprocess::{NormalizationConfig, Preprocessor, StopwordList};
pub use report::{render_report, AnalysisReport, ReportFormat};
pub use similarity::{
    cosine_similarity, similarity_matrix, top_k_for_text, top_k_similar, RankedMatch,
    SimilarityFilters, SimilarityScore,
};
