//! In-browser similarity explorer over the bundled sample corpus, using the
//! deterministic hashed embedder. Every export returns a JSON string.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use dxsim_core::analysis::TermIndex;
use dxsim_core::{
    cosine_similarity, ingest_corpus, render_report, CorpusFormat, Embedder, Engine, EngineOptions,
    HashedEmbedder, Preprocessor, ReportFormat, SimilarityFilters, StopwordList, TermWeight,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const SAMPLE_CORPUS: &str = include_str!("../../../data/sample_corpus.jsonl");

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn timestamp(now_ms: f64) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(now_ms as i64).unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub score: f64,
    pub score_text: String,
    pub shared_terms: Vec<TermWeight>,
    pub jaccard: f64,
}

/// Cosine similarity of two texts plus the terms they share.
pub fn compare(a: &str, b: &str, dim: usize, seed: u64) -> Result<Comparison, String> {
    let embedder = HashedEmbedder::new(dim, seed).map_err(|e| e.to_string())?;
    let pre = Preprocessor::default();
    let pa = pre
        .process_text("a", a)
        .map_err(|_| "first text is empty after preprocessing")?;
    let pb = pre
        .process_text("b", b)
        .map_err(|_| "second text is empty after preprocessing")?;
    let va = embedder
        .embed_text(&pre.embedding_input(&pa))
        .map_err(|e| e.to_string())?;
    let vb = embedder
        .embed_text(&pre.embedding_input(&pb))
        .map_err(|e| e.to_string())?;
    let score = cosine_similarity(&va, &vb)
        .map_err(|e| e.to_string())?
        .value();
    let index = TermIndex::from_processed(
        [("a".to_string(), pa), ("b".to_string(), pb)],
        &StopwordList::empty(),
        true,
    );
    let overlap = index
        .common_features("a", "b", 8)
        .map_err(|e| e.to_string())?;
    Ok(Comparison {
        score,
        score_text: dxsim_core::report::format_score(score),
        shared_terms: overlap.shared_terms,
        jaccard: overlap.jaccard,
    })
}

#[wasm_bindgen(js_name = compareTexts)]
pub fn compare_texts(a: &str, b: &str, dim: usize, seed: u64) -> Result<String, JsError> {
    let c = compare(a, b, dim, seed).map_err(js_err)?;
    serde_json::to_string(&c).map_err(js_err)
}

/// The sample corpus embedded once; queries are answered from memory.
#[wasm_bindgen]
pub struct Explorer {
    engine: Engine,
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(dim: usize, seed: u64) -> Result<Explorer, JsError> {
        Self::build(dim, seed).map_err(js_err)
    }

    /// Case metadata as a JSON array.
    pub fn cases(&self) -> String {
        serde_json::to_string(&self.engine.corpus().list_cases(None)).expect("summaries serialize")
    }

    pub fn fingerprint(&self) -> String {
        self.engine.embeddings().backend_fingerprint().to_string()
    }

    /// Ranked matches for a corpus case as a report JSON object, with the
    /// text rendering under `"text"`.
    pub fn similar(
        &self,
        target: &str,
        k: usize,
        exclude_same_company: bool,
        exclude_same_sub_industry: bool,
        exclude_same_industry: bool,
        now_ms: f64,
    ) -> Result<String, JsError> {
        let filters = SimilarityFilters {
            exclude_company_of_target: exclude_same_company,
            exclude_same_sub_industry,
            exclude_same_industry,
            ..SimilarityFilters::default()
        };
        let report = self
            .engine
            .similar(
                target,
                k,
                &filters,
                dxsim_core::DEFAULT_FEATURE_COUNT,
                timestamp(now_ms),
            )
            .map_err(js_err)?;
        Ok(with_text(&report))
    }

    /// Ranks the corpus against free text.
    #[wasm_bindgen(js_name = whatIf)]
    pub fn what_if(&self, text: &str, k: usize, now_ms: f64) -> Result<String, JsError> {
        let report = self
            .engine
            .what_if(
                text,
                k,
                &SimilarityFilters::none(),
                dxsim_core::DEFAULT_FEATURE_COUNT,
                timestamp(now_ms),
            )
            .map_err(js_err)?;
        Ok(with_text(&report))
    }
}

impl Explorer {
    pub fn build(dim: usize, seed: u64) -> Result<Explorer, String> {
        let corpus = ingest_corpus(SAMPLE_CORPUS.as_bytes(), CorpusFormat::JsonLines)
            .map_err(|e| e.to_string())?;
        let embedder = HashedEmbedder::new(dim, seed).map_err(|e| e.to_string())?;
        let engine = Engine::build(
            corpus,
            Preprocessor::default(),
            Arc::new(embedder),
            None,
            EngineOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        Ok(Explorer { engine })
    }
}

fn with_text(report: &dxsim_core::AnalysisReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    let text =
        String::from_utf8(render_report(report, ReportFormat::Text)).expect("reports are UTF-8");
    value["text"] = serde_json::Value::String(text);
    value.to_string()
}
