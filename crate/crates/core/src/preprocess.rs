//! Text normalization, tokenization and stopword removal.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::CaseDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    /// NFKC folding (full-width latin, half-width kana, ligatures, ...).
    pub unicode_form: bool,
    pub lowercase: bool,
    pub collapse_whitespace: bool,
    /// Replace every character that is neither alphanumeric nor whitespace
    /// with a space.
    pub strip_punctuation: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            unicode_form: true,
            lowercase: true,
            collapse_whitespace: true,
            strip_punctuation: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("document '{0}' has no tokens left after preprocessing")]
    EmptyAfterPreprocessing(String),
    #[error("failed reading stopword list: {0}")]
    Read(#[from] std::io::Error),
}

fn normalize_once(text: &str, config: &NormalizationConfig) -> String {
    let mut out: String = if config.unicode_form {
        text.nfkc().collect()
    } else {
        text.to_string()
    };
    if config.lowercase {
        out = out.to_lowercase();
    }
    if config.strip_punctuation {
        out = out
            .chars()
            .map(|c| {
                if c.is_alphanumeric() || c.is_whitespace() {
                    c
                } else {
                    ' '
                }
            })
            .collect();
    }
    if config.collapse_whitespace {
        out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    out
}

/// Applies the configured steps until the text stops changing.
///
/// A single NFKC + lowercase pass is not always a fixed point (lowercasing can
/// produce sequences NFKC folds again, and NFKC can produce uppercase letters
/// from modifier forms), so the steps are repeated. In practice this converges
/// after one or two rounds.
pub fn normalize_text(text: &str, config: &NormalizationConfig) -> String {
    let mut current = normalize_once(text, config);
    for _ in 0..8 {
        let next = normalize_once(&current, config);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Han, kana and the CJK iteration/prolonged-sound marks.
fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3005}'..='\u{3007}'
        | '\u{3040}'..='\u{309F}'
        | '\u{30A0}'..='\u{30FF}'
        | '\u{31F0}'..='\u{31FF}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{FF66}'..='\u{FF9F}'
        | '\u{20000}'..='\u{2FA1F}')
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    /// Drops empty entries and splits any entry containing whitespace, so
    /// the result always satisfies the token invariants.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            tokens: tokens
                .into_iter()
                .flat_map(|t| {
                    t.as_ref()
                        .split_whitespace()
                        .map(str::to_string)
                        .collect::<Vec<_>>()
                })
                .collect(),
        }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn into_vec(self) -> Vec<String> {
        self.tokens
    }
}

/// Whitespace split followed by a split at every transition between CJK and
/// non-CJK characters, e.g. `"AI活用で効率化"` becomes `["AI", "活用で効率化"]`.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut start = 0;
        let mut prev: Option<bool> = None;
        for (i, c) in word.char_indices() {
            let class = is_cjk(c);
            if prev.is_some_and(|p| p != class) {
                tokens.push(word[start..i].to_string());
                start = i;
            }
            prev = Some(class);
        }
        tokens.push(word[start..].to_string());
    }
    TokenSequence { tokens }
}

const BUILTIN_STOPWORDS: &[&str] = &[
    "a",
    "an",
    "and",
    "are",
    "as",
    "at",
    "be",
    "been",
    "by",
    "for",
    "from",
    "has",
    "have",
    "in",
    "into",
    "is",
    "it",
    "its",
    "of",
    "on",
    "or",
    "our",
    "that",
    "the",
    "their",
    "them",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "via",
    "was",
    "we",
    "were",
    "which",
    "with",
    "の",
    "に",
    "は",
    "を",
    "が",
    "で",
    "と",
    "も",
    "へ",
    "や",
    "から",
    "まで",
    "より",
    "こと",
    "する",
    "した",
    "して",
    "ため",
    "など",
    "これ",
    "それ",
    "この",
    "その",
    "および",
    "また",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
    source: String,
}

impl StopwordList {
    pub fn empty() -> Self {
        Self {
            words: HashSet::new(),
            source: "empty".into(),
        }
    }

    pub fn builtin(config: &NormalizationConfig) -> Self {
        Self::from_words(BUILTIN_STOPWORDS.iter().copied(), "builtin", config)
    }

    /// Every entry is normalized with `config`, so tokens normalized the
    /// same way compare equal.
    pub fn from_words<I, S>(
        words: I,
        source: impl Into<String>,
        config: &NormalizationConfig,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| normalize_text(w.as_ref(), config))
            .filter(|w| !w.is_empty())
            .collect();
        Self {
            words,
            source: source.into(),
        }
    }

    /// One token per line; blank lines and lines starting with `#` are skipped.
    pub fn from_reader(
        reader: impl BufRead,
        source: impl Into<String>,
        config: &NormalizationConfig,
    ) -> Result<Self, PreprocessError> {
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            entries.push(trimmed.to_string());
        }
        Ok(Self::from_words(entries, source, config))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

pub fn remove_stopwords(tokens: &TokenSequence, list: &StopwordList) -> TokenSequence {
    TokenSequence {
        tokens: tokens
            .iter()
            .filter(|t| !list.contains(t))
            .map(str::to_string)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedText {
    pub normalized_text: String,
    pub tokens: TokenSequence,
}

/// Normalization config plus stopword list, applied together.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub config: NormalizationConfig,
    pub stopwords: StopwordList,
    /// Send the stopword-filtered token string to the embedder instead of the
    /// normalized text.
    pub embed_uses_preprocessed: bool,
}

impl Default for Preprocessor {
    fn default() -> Self {
        let config = NormalizationConfig::default();
        Self {
            config,
            stopwords: StopwordList::builtin(&config),
            embed_uses_preprocessed: false,
        }
    }
}

impl Preprocessor {
    pub fn new(config: NormalizationConfig, stopwords: StopwordList) -> Self {
        Self {
            config,
            stopwords,
            embed_uses_preprocessed: false,
        }
    }

    pub fn process_text(&self, label: &str, text: &str) -> Result<ProcessedText, PreprocessError> {
        let normalized_text = normalize_text(text, &self.config);
        let tokens = remove_stopwords(&tokenize(&normalized_text), &self.stopwords);
        if tokens.is_empty() {
            return Err(PreprocessError::EmptyAfterPreprocessing(label.to_string()));
        }
        Ok(ProcessedText {
            normalized_text,
            tokens,
        })
    }

    pub fn preprocess(&self, doc: &CaseDocument) -> Result<ProcessedText, PreprocessError> {
        self.process_text(&doc.id, &doc.text)
    }

    /// The exact string handed to the embedding backend for `processed`.
    pub fn embedding_input(&self, processed: &ProcessedText) -> String {
        if self.embed_uses_preprocessed {
            processed.tokens.as_slice().join(" ")
        } else {
            processed.normalized_text.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> NormalizationConfig {
        NormalizationConfig::default()
    }

    #[test]
    fn nfkc_folds_fullwidth() {
        let config = NormalizationConfig {
            lowercase: false,
            ..cfg()
        };
        assert_eq!(normalize_text("ＤＸ　推進", &config), "DX 推進");
        // half-width katakana compose into full-width
        assert_eq!(normalize_text("ﾃﾞｼﾞﾀﾙ", &config), "デジタル");
    }

    #[test]
    fn whitespace_and_case() {
        assert_eq!(normalize_text("AI  and   RPA", &cfg()), "ai and rpa");
        assert_eq!(normalize_text("", &cfg()), "");
    }

    #[test]
    fn punctuation_flag() {
        assert_eq!(normalize_text("AI/IoT, (RPA).", &cfg()), "ai iot rpa");
        let keep = NormalizationConfig {
            strip_punctuation: false,
            ..cfg()
        };
        assert_eq!(normalize_text("AI/IoT, (RPA).", &keep), "ai/iot, (rpa).");
    }

    #[test]
    fn modifier_capital_reaches_fixed_point() {
        // U+1D2C folds to 'A' under NFKC only after lowercasing was applied
        let once = normalize_text("\u{1D2C}", &cfg());
        assert_eq!(once, "a");
        assert_eq!(normalize_text(&once, &cfg()), once);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("ai platform ai").into_vec(),
            ["ai", "platform", "ai"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("AI活用で効率化").into_vec(),
            ["AI", "活用で効率化"]
        );
        assert_eq!(
            tokenize("dx推進室とai2024年").into_vec(),
            ["dx", "推進室と", "ai2024", "年"]
        );
    }

    #[test]
    fn stopword_removal() {
        let list = StopwordList::from_words(["the", "of"], "test", &cfg());
        let toks = TokenSequence::new(["the", "ai", "of", "future"]);
        assert_eq!(remove_stopwords(&toks, &list).into_vec(), ["ai", "future"]);
        assert_eq!(remove_stopwords(&toks, &StopwordList::empty()), toks);
        let all = StopwordList::from_words(["the", "ai", "of", "future"], "test", &cfg());
        assert!(remove_stopwords(&toks, &all).is_empty());
    }

    #[test]
    fn stopword_file_format() {
        let src = "# comment\nThe\n\n  ＯＦ  \n";
        let list = StopwordList::from_reader(src.as_bytes(), "mem", &cfg()).unwrap();
        assert_eq!(list.len(), 2);
        assert!(list.contains("the"));
        assert!(list.contains("of"));
        assert_eq!(list.source(), "mem");
    }

    fn doc(id: &str, text: &str) -> CaseDocument {
        CaseDocument {
            id: id.into(),
            company: "c".into(),
            industry: "i".into(),
            sub_industry: "s".into(),
            year: 2020,
            text: text.into(),
        }
    }

    #[test]
    fn preprocess_annihilation() {
        let p = Preprocessor::new(cfg(), StopwordList::from_words(["of"], "t", &cfg()));
        match p.preprocess(&doc("d", "of of of")) {
            Err(PreprocessError::EmptyAfterPreprocessing(id)) => assert_eq!(id, "d"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preprocess_composition() {
        let p = Preprocessor::new(cfg(), StopwordList::empty());
        let out = p.preprocess(&doc("d", "AI platform")).unwrap();
        assert_eq!(out.normalized_text, "ai platform");
        assert_eq!(out.tokens.into_vec(), ["ai", "platform"]);
    }

    #[test]
    fn preprocess_three_doc_fixture() {
        // token multisets computed by hand from the texts below
        let p = Preprocessor::default();
        let docs = [
            doc("a", "The AI platform for the Future of work."),
            doc("b", "ＲＰＡ and AI: a new platform, a new culture"),
            doc("c", "DX推進室 and クラウド移行"),
        ];
        let expected: [&[&str]; 3] = [
            &["ai", "platform", "future", "work"],
            &["rpa", "ai", "new", "platform", "new", "culture"],
            &["dx", "推進室", "クラウド移行"],
        ];
        for (d, want) in docs.iter().zip(expected) {
            let mut got = p.preprocess(d).unwrap().tokens.into_vec();
            let mut want: Vec<String> = want.iter().map(|s| s.to_string()).collect();
            got.sort();
            want.sort();
            assert_eq!(got, want, "doc {}", d.id);
        }
    }

    #[test]
    fn embedding_input_modes() {
        let mut p = Preprocessor::default();
        let processed = p.process_text("q", "The AI platform").unwrap();
        assert_eq!(p.embedding_input(&processed), "the ai platform");
        p.embed_uses_preprocessed = true;
        assert_eq!(p.embedding_input(&processed), "ai platform");
    }

    fn configs() -> impl Strategy<Value = NormalizationConfig> {
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(u, l, c, s)| {
            NormalizationConfig {
                unicode_form: u,
                lowercase: l,
                collapse_whitespace: c,
                strip_punctuation: s,
            }
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "\\PC{0,40}", config in configs()) {
            let once = normalize_text(&text, &config);
            prop_assert_eq!(normalize_text(&once, &config), once);
        }

        #[test]
        fn normalize_is_idempotent_on_cjk_mix(text in "[ＡａA-Za-z０-９ｱ-ﾝ ぁ-んァ-ン一-龥　、。・!?\\t\\n]{0,40}", config in configs()) {
            let once = normalize_text(&text, &config);
            prop_assert_eq!(normalize_text(&once, &config), once);
        }

        #[test]
        fn tokens_never_contain_whitespace(text in "\\PC{0,40}") {
            let toks = tokenize(&text);
            for t in toks.iter() {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
            // no non-whitespace character is lost
            let joined: String = toks.iter().collect();
            let original: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, original);
        }

        #[test]
        fn stopword_output_is_subsequence(
            toks in proptest::collection::vec("[a-e]{1,2}", 0..20),
            stop in proptest::collection::vec("[a-e]{1,2}", 0..5),
        ) {
            let seq = TokenSequence::new(&toks);
            let list = StopwordList::from_words(&stop, "t", &NormalizationConfig::default());
            let out = remove_stopwords(&seq, &list);
            let mut it = seq.iter();
            for t in out.iter() {
                prop_assert!(!list.contains(t));
                prop_assert!(it.any(|s| s == t));
            }
        }
    }
}
