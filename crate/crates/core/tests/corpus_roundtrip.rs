use dxsim_core::{ingest_corpus, CorpusFormat};
use proptest::prelude::*;
use serde_json::json;

const INDUSTRIES: [&str; 4] = ["Manufacturing", "Wholesale", "Finance", "Retail"];

fn synthetic_line(i: usize) -> (String, String) {
    let text = format!(
        "Case {i}: ＤＸ推進 with AI \u{3000} and \"quoted\" text, émoji 🚀, line\\nbreak #{}",
        i * 7919 % 1000
    );
    let line = json!({
        "id": format!("case-{i:04}"),
        "company": format!("Company {}", i % 97),
        "industry": INDUSTRIES[i % 4],
        "sub_industry": format!("sub{}", i % 13),
        "year": 2015 + (i % 9) as i64,
        "text": text,
        "source_url": "ignored",
    })
    .to_string();
    (line, text)
}

#[test]
fn texts_round_trip_byte_for_byte() {
    let (lines, texts): (Vec<String>, Vec<String>) = (0..350).map(synthetic_line).unzip();
    let src = lines.join("\n");
    let corpus = ingest_corpus(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
    assert_eq!(corpus.len(), 350);
    assert_eq!(corpus.list_cases(None).len(), 350);
    for (i, text) in texts.iter().enumerate() {
        let doc = corpus.get_case(&format!("case-{i:04}")).unwrap();
        assert_eq!(doc.text.as_bytes(), text.as_bytes());
    }
    // ingestion order is preserved
    let ids: Vec<String> = corpus.list_cases(None).into_iter().map(|c| c.id).collect();
    let expected: Vec<String> = (0..350).map(|i| format!("case-{i:04}")).collect();
    assert_eq!(ids, expected);

    let again = ingest_corpus(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
    assert_eq!(corpus, again);
}

proptest! {
    #[test]
    fn list_length_matches_record_count(n in 1usize..60, blank_every in 2usize..7) {
        let mut src = String::new();
        for i in 0..n {
            src.push_str(&synthetic_line(i).0);
            src.push('\n');
            if i % blank_every == 0 {
                src.push('\n');
            }
        }
        let corpus = ingest_corpus(src.as_bytes(), CorpusFormat::JsonLines).unwrap();
        prop_assert_eq!(corpus.list_cases(None).len(), n);
        let per_industry: usize = INDUSTRIES
            .iter()
            .map(|ind| corpus.list_cases(Some(ind)).len())
            .sum();
        prop_assert_eq!(per_industry, n);
    }
}
