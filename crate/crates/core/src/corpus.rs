//! Case-document corpus: JSONL ingestion, validation and lookup.
//!
//! Each line of a corpus file is one JSON object with the required keys
//! `id`, `company`, `industry`, `sub_industry`, `year` and `text`. Unknown
//! keys are ignored. Blank lines are skipped but still counted, so line
//! numbers in diagnostics match what an editor shows.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// One company's DX case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDocument {
    pub id: String,
    pub company: String,
    pub industry: String,
    pub sub_industry: String,
    pub year: i32,
    pub text: String,
}

/// Metadata view of a document, as returned by [`Corpus::list_cases`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub company: String,
    pub industry: String,
    pub sub_industry: String,
    pub year: i32,
}

impl From<&CaseDocument> for CaseSummary {
    fn from(doc: &CaseDocument) -> Self {
        Self {
            id: doc.id.clone(),
            company: doc.company.clone(),
            industry: doc.industry.clone(),
            sub_industry: doc.sub_industry.clone(),
            year: doc.year,
        }
    }
}

/// Only JSONL is defined today; the tag keeps the ingest signature open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CorpusFormat {
    #[default]
    JsonLines,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("failed reading corpus: {0}")]
    Read(String),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: duplicate id '{id}' (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("corpus contains no records")]
    EmptyCorpus,
    #[error("unknown case id '{0}'")]
    UnknownId(String),
}

/// Immutable, ordered collection of case documents with an id index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<CaseDocument>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from already-parsed documents, enforcing the same
    /// invariants as [`ingest_corpus`].
    pub fn from_documents(documents: Vec<CaseDocument>) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut id_index = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            check_document(doc).map_err(|reason| CorpusError::MalformedRecord {
                line: pos + 1,
                reason,
            })?;
            if let Some(first) = id_index.insert(doc.id.clone(), pos) {
                return Err(CorpusError::DuplicateId {
                    id: doc.id.clone(),
                    line: pos + 1,
                    first_line: first + 1,
                });
            }
        }
        Ok(Self {
            documents,
            id_index,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[CaseDocument] {
        &self.documents
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn get_case(&self, id: &str) -> Result<&CaseDocument, CorpusError> {
        self.position(id)
            .map(|pos| &self.documents[pos])
            .ok_or_else(|| CorpusError::UnknownId(id.to_string()))
    }

    /// Metadata tuples in ingestion order, optionally restricted to one
    /// top-level industry (exact match).
    pub fn list_cases(&self, industry_filter: Option<&str>) -> Vec<CaseSummary> {
        self.documents
            .iter()
            .filter(|d| industry_filter.is_none_or(|f| d.industry == f))
            .map(CaseSummary::from)
            .collect()
    }
}

fn check_document(doc: &CaseDocument) -> Result<(), String> {
    if doc.id.is_empty() {
        return Err("field 'id' must be non-empty".into());
    }
    if doc.industry.trim().is_empty() {
        return Err("field 'industry' must be non-empty".into());
    }
    if doc.sub_industry.trim().is_empty() {
        return Err("field 'sub_industry' must be non-empty".into());
    }
    if doc.text.trim().is_empty() {
        return Err("field 'text' must be non-empty".into());
    }
    Ok(())
}

fn string_field(obj: &Map<String, Value>, field: &str) -> Result<String, String> {
    match obj.get(field) {
        None => Err(format!("missing required field '{field}'")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field '{field}' must be a string")),
    }
}

fn parse_record(line: &str) -> Result<CaseDocument, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("record must be a JSON object".into());
    };
    let year = match obj.get("year") {
        None => return Err("missing required field 'year'".into()),
        Some(v) => v
            .as_i64()
            .and_then(|y| i32::try_from(y).ok())
            .ok_or_else(|| "field 'year' must be an integer".to_string())?,
    };
    let doc = CaseDocument {
        id: string_field(&obj, "id")?,
        company: string_field(&obj, "company")?,
        industry: string_field(&obj, "industry")?,
        sub_industry: string_field(&obj, "sub_industry")?,
        year,
        text: string_field(&obj, "text")?,
    };
    check_document(&doc)?;
    Ok(doc)
}

/// Reads every line and reports every problem found, instead of stopping at
/// the first one. Used by `validate` to print full diagnostics.
pub fn validate_corpus(source: impl BufRead) -> (Vec<CaseDocument>, Vec<CorpusError>) {
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errors.push(CorpusError::Read(e.to_string()));
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(doc) => {
                if let Some(&first_line) = seen.get(&doc.id) {
                    errors.push(CorpusError::DuplicateId {
                        id: doc.id,
                        line: line_no,
                        first_line,
                    });
                } else {
                    seen.insert(doc.id.clone(), line_no);
                    docs.push(doc);
                }
            }
            Err(reason) => errors.push(CorpusError::MalformedRecord {
                line: line_no,
                reason,
            }),
        }
    }
    if docs.is_empty() && errors.is_empty() {
        errors.push(CorpusError::EmptyCorpus);
    }
    (docs, errors)
}

/// Parses a line-delimited corpus. Any malformed record or duplicate id
/// rejects the whole ingest.
pub fn ingest_corpus(source: impl BufRead, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    match format {
        CorpusFormat::JsonLines => {
            let (docs, errors) = validate_corpus(source);
            if let Some(first) = errors.into_iter().next() {
                return Err(first);
            }
            Corpus::from_documents(docs)
        }
    }
}
