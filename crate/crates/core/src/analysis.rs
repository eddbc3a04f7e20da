//! Shared salient terms between cases.
//!
//! Terms are weighted by TF-IDF with a smoothed IDF,
//! `idf(t) = ln((1 + D) / (1 + d_t)) + 1`, where `D` is the number of
//! documents and `d_t` the number containing `t`. TF is the term count over
//! the document's total term count. Optionally adjacent token pairs that both
//! survive stopword removal are added as bigram terms ("communication
//! platform").

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::preprocess::{tokenize, PreprocessError, Preprocessor, ProcessedText, StopwordList};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("unknown case id '{0}'")]
    UnknownId(String),
    #[error("salient terms need at least 2 documents, corpus has {0}")]
    CorpusTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureOverlap {
    pub doc_a: String,
    pub doc_b: String,
    pub shared_terms: Vec<TermWeight>,
    pub jaccard: f64,
}

/// Term counts of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocTerms {
    counts: BTreeMap<String, usize>,
    total: usize,
}

impl DocTerms {
    pub fn from_terms<I: IntoIterator<Item = String>>(terms: I) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for t in terms {
            *counts.entry(t).or_insert(0) += 1;
            total += 1;
        }
        Self { counts, total }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.counts.contains_key(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    fn tf(&self, term: &str) -> f64 {
        match self.counts.get(term) {
            Some(&c) if self.total > 0 => c as f64 / self.total as f64,
            _ => 0.0,
        }
    }
}

/// Adjacent token pairs from the unfiltered token stream where neither
/// token is a stopword.
pub fn adjacent_bigrams(normalized_text: &str, stopwords: &StopwordList) -> Vec<String> {
    let tokens = tokenize(normalized_text);
    tokens
        .as_slice()
        .windows(2)
        .filter(|w| !stopwords.contains(&w[0]) && !stopwords.contains(&w[1]))
        .map(|w| format!("{} {}", w[0], w[1]))
        .collect()
}

/// Term counts for every corpus document plus the shared document-frequency
/// table. Built once per corpus and read concurrently afterwards.
#[derive(Debug, Clone)]
pub struct TermIndex {
    docs: HashMap<String, DocTerms>,
    df: HashMap<String, usize>,
    n_docs: usize,
    bigrams: bool,
}

impl TermIndex {
    pub fn build(
        corpus: &Corpus,
        preprocessor: &Preprocessor,
        bigrams: bool,
    ) -> Result<Self, PreprocessError> {
        let processed = corpus
            .documents()
            .iter()
            .map(|d| Ok((d.id.clone(), preprocessor.preprocess(d)?)))
            .collect::<Result<Vec<_>, PreprocessError>>()?;
        Ok(Self::from_processed(
            processed,
            &preprocessor.stopwords,
            bigrams,
        ))
    }

    pub fn from_processed<I>(processed: I, stopwords: &StopwordList, bigrams: bool) -> Self
    where
        I: IntoIterator<Item = (String, ProcessedText)>,
    {
        let mut docs = HashMap::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        for (id, p) in processed {
            let terms = Self::terms_of(&p, stopwords, bigrams);
            for t in terms.terms() {
                *df.entry(t.to_string()).or_insert(0) += 1;
            }
            docs.insert(id, terms);
        }
        Self {
            n_docs: docs.len(),
            docs,
            df,
            bigrams,
        }
    }

    fn terms_of(p: &ProcessedText, stopwords: &StopwordList, bigrams: bool) -> DocTerms {
        let mut terms: Vec<String> = p.tokens.iter().map(str::to_string).collect();
        if bigrams {
            terms.extend(adjacent_bigrams(&p.normalized_text, stopwords));
        }
        DocTerms::from_terms(terms)
    }

    /// Term counts for text outside the corpus (e.g. a what-if query). The
    /// document-frequency table is not modified.
    pub fn terms_for(&self, processed: &ProcessedText, stopwords: &StopwordList) -> DocTerms {
        Self::terms_of(processed, stopwords, self.bigrams)
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn doc_terms(&self, id: &str) -> Result<&DocTerms, AnalysisError> {
        self.docs
            .get(id)
            .ok_or_else(|| AnalysisError::UnknownId(id.to_string()))
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.document_frequency(term) as f64)).ln() + 1.0
    }

    fn weight(&self, terms: &DocTerms, term: &str) -> f64 {
        terms.tf(term) * self.idf(term)
    }

    /// Top-`n` terms of a corpus document by TF-IDF.
    pub fn salient_terms(&self, doc_id: &str, n: usize) -> Result<Vec<TermWeight>, AnalysisError> {
        if self.n_docs < 2 {
            return Err(AnalysisError::CorpusTooSmall(self.n_docs));
        }
        let terms = self.doc_terms(doc_id)?;
        let weighted = terms
            .terms()
            .map(|t| TermWeight {
                term: t.to_string(),
                weight: self.weight(terms, t),
            })
            .collect();
        Ok(top_n(weighted, n))
    }

    fn overlap(&self, a: (&str, &DocTerms), b: (&str, &DocTerms), n: usize) -> FeatureOverlap {
        let (ta, tb) = (a.1, b.1);
        let shared: Vec<TermWeight> = ta
            .terms()
            .filter(|t| tb.contains(t))
            .map(|t| TermWeight {
                term: t.to_string(),
                weight: self.weight(ta, t) + self.weight(tb, t),
            })
            .collect();
        let intersection = shared.len();
        let union = ta.distinct() + tb.distinct() - intersection;
        let jaccard = if union == 0 {
            0.0
        } else {
            intersection as f64 / union as f64
        };
        FeatureOverlap {
            doc_a: a.0.to_string(),
            doc_b: b.0.to_string(),
            shared_terms: top_n(shared, n),
            jaccard,
        }
    }

    /// Terms present in both documents, ranked by the sum of their TF-IDF
    /// weights in each. Jaccard is over the full term sets.
    pub fn common_features(
        &self,
        doc_a: &str,
        doc_b: &str,
        n: usize,
    ) -> Result<FeatureOverlap, AnalysisError> {
        let ta = self.doc_terms(doc_a)?;
        let tb = self.doc_terms(doc_b)?;
        Ok(self.overlap((doc_a, ta), (doc_b, tb), n))
    }

    /// Like [`TermIndex::common_features`] with an out-of-corpus query on the
    /// `a` side.
    pub fn common_features_with(
        &self,
        query_label: &str,
        query: &DocTerms,
        doc_b: &str,
        n: usize,
    ) -> Result<FeatureOverlap, AnalysisError> {
        let tb = self.doc_terms(doc_b)?;
        Ok(self.overlap((query_label, query), (doc_b, tb), n))
    }

    /// Terms shared by every listed document, weighted by the sum over them.
    pub fn shared_by_all(&self, ids: &[&str], n: usize) -> Result<Vec<TermWeight>, AnalysisError> {
        let docs = ids
            .iter()
            .map(|id| self.doc_terms(id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.shared_among(&docs, n))
    }

    pub fn shared_among(&self, docs: &[&DocTerms], n: usize) -> Vec<TermWeight> {
        let Some((first, rest)) = docs.split_first() else {
            return Vec::new();
        };
        let common: BTreeSet<&str> = first
            .terms()
            .filter(|t| rest.iter().all(|d| d.contains(t)))
            .collect();
        let weighted = common
            .into_iter()
            .map(|t| TermWeight {
                term: t.to_string(),
                weight: docs.iter().map(|d| self.weight(d, t)).sum(),
            })
            .collect();
        top_n(weighted, n)
    }
}

fn top_n(mut terms: Vec<TermWeight>, n: usize) -> Vec<TermWeight> {
    terms.sort_by(|a, b| match b.weight.total_cmp(&a.weight) {
        Ordering::Equal => a.term.cmp(&b.term),
        o => o,
    });
    terms.truncate(n);
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::TokenSequence;

    fn index(docs: &[&[&str]]) -> TermIndex {
        let processed = docs.iter().enumerate().map(|(i, toks)| {
            (
                format!("d{i}"),
                ProcessedText {
                    normalized_text: toks.join(" "),
                    tokens: TokenSequence::new(toks.iter()),
                },
            )
        });
        TermIndex::from_processed(processed, &StopwordList::empty(), false)
    }

    #[test]
    fn tfidf_worked_example() {
        let idx = index(&[&["ai", "ai", "cloud"], &["cloud"]]);
        let terms = idx.salient_terms("d0", 10).unwrap();
        // hand computation: tf = 2/3, idf = ln(3/2) + 1
        //   ln(1.5) = 0.405465108108164..., idf = 1.405465108108164
        //   weight = 0.936976738738776
        assert_eq!(terms[0].term, "ai");
        assert!((terms[0].weight - 0.936_976_738_738_776).abs() < 1e-12);
        // "cloud" is in both docs: idf = ln(1) + 1 = 1, tf = 1/3
        assert_eq!(terms[1].term, "cloud");
        assert!((terms[1].weight - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(idx.idf("cloud"), 1.0);
    }

    #[test]
    fn salient_truncation_and_errors() {
        let idx = index(&[&["a", "b"], &["c"]]);
        assert_eq!(idx.salient_terms("d0", 100).unwrap().len(), 2);
        assert_eq!(idx.salient_terms("d0", 1).unwrap().len(), 1);
        assert_eq!(
            idx.salient_terms("zz", 1),
            Err(AnalysisError::UnknownId("zz".into()))
        );
        let single = index(&[&["a"]]);
        assert_eq!(
            single.salient_terms("d0", 1),
            Err(AnalysisError::CorpusTooSmall(1))
        );
    }

    #[test]
    fn ties_break_by_term() {
        let idx = index(&[&["b", "a"], &["z"]]);
        let terms = idx.salient_terms("d0", 2).unwrap();
        assert_eq!(terms[0].term, "a");
        assert_eq!(terms[1].term, "b");
    }

    #[test]
    fn jaccard_examples() {
        let idx = index(&[
            &["ai", "platform"],
            &["ai", "robot"],
            &["ai", "platform"],
            &["iron"],
        ]);
        let o = idx.common_features("d0", "d1", 10).unwrap();
        let shared: Vec<_> = o.shared_terms.iter().map(|t| t.term.as_str()).collect();
        assert_eq!(shared, ["ai"]);
        assert_eq!(o.jaccard, 1.0 / 3.0);

        let same = idx.common_features("d0", "d2", 10).unwrap();
        assert_eq!(same.jaccard, 1.0);
        assert_eq!(same.shared_terms.len(), 2);

        let disjoint = idx.common_features("d0", "d3", 10).unwrap();
        assert!(disjoint.shared_terms.is_empty());
        assert_eq!(disjoint.jaccard, 0.0);
    }

    #[test]
    fn bigrams_respect_stopwords_and_adjacency() {
        let stop = StopwordList::from_words(["and"], "t", &Default::default());
        assert_eq!(
            adjacent_bigrams("communication platform and ai robot", &stop),
            ["communication platform", "ai robot"]
        );
    }

    #[test]
    fn three_way_intersection() {
        let idx = index(&[&["ai", "platform", "x"], &["ai", "platform"], &["ai", "y"]]);
        let all = idx.shared_by_all(&["d0", "d1", "d2"], 10).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].term, "ai");
    }
}
