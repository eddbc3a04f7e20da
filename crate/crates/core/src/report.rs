//! Query results as a table of matches with their common features, rendered
//! as plain text, Markdown or JSON.
//!
//! Text formats show scores with six decimals; JSON keeps full precision.

use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{FeatureOverlap, TermWeight};
use crate::corpus::{CaseDocument, Corpus};
use crate::similarity::{RankedMatch, SimilarityFilters};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown case id '{0}'")]
    UnknownId(String),
    #[error("overlap list does not line up with matches: {0}")]
    MisalignedOverlaps(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTarget {
    pub id: String,
    pub company: String,
    pub sub_industry: String,
}

impl ReportTarget {
    pub fn from_case(doc: &CaseDocument) -> Self {
        Self {
            id: doc.id.clone(),
            company: doc.company.clone(),
            sub_industry: doc.sub_industry.clone(),
        }
    }

    /// Placeholder target for ad-hoc text queries.
    pub fn what_if() -> Self {
        Self {
            id: "what-if".into(),
            company: "What-if query".into(),
            sub_industry: "-".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rank: usize,
    pub id: String,
    pub company: String,
    pub industry: String,
    pub sub_industry: String,
    pub score: f64,
    pub common_features: Vec<String>,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub target: ReportTarget,
    pub matches: Vec<ReportRow>,
    /// Terms shared by the target and every match.
    pub common_to_all: Vec<String>,
    #[serde(rename = "filters")]
    pub filters_used: SimilarityFilters,
    pub backend_fingerprint: String,
    #[serde(with = "rfc3339")]
    pub generated_at: DateTime<Utc>,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Metadata echoed into every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    pub filters: SimilarityFilters,
    pub backend_fingerprint: String,
    pub generated_at: DateTime<Utc>,
}

fn terms(list: &[TermWeight]) -> Vec<String> {
    list.iter().map(|t| t.term.clone()).collect()
}

/// One row per match in rank order; `overlaps[i]` must describe `matches[i]`.
pub fn build_report(
    target: ReportTarget,
    matches: &[RankedMatch],
    overlaps: &[FeatureOverlap],
    common_to_all: &[TermWeight],
    corpus: &Corpus,
    context: ReportContext,
) -> Result<AnalysisReport, ReportError> {
    if matches.len() != overlaps.len() {
        return Err(ReportError::MisalignedOverlaps(format!(
            "{} matches but {} overlaps",
            matches.len(),
            overlaps.len()
        )));
    }
    let mut rows = Vec::with_capacity(matches.len());
    for (m, o) in matches.iter().zip(overlaps) {
        if o.doc_b != m.doc_id {
            return Err(ReportError::MisalignedOverlaps(format!(
                "rank {} is '{}' but its overlap is for '{}'",
                m.rank, m.doc_id, o.doc_b
            )));
        }
        let doc = corpus
            .get_case(&m.doc_id)
            .map_err(|_| ReportError::UnknownId(m.doc_id.clone()))?;
        rows.push(ReportRow {
            rank: m.rank,
            id: doc.id.clone(),
            company: doc.company.clone(),
            industry: doc.industry.clone(),
            sub_industry: doc.sub_industry.clone(),
            score: m.score.value(),
            common_features: terms(&o.shared_terms),
            jaccard: o.jaccard,
        });
    }
    Ok(AnalysisReport {
        target,
        matches: rows,
        common_to_all: terms(common_to_all),
        filters_used: context.filters,
        backend_fingerprint: context.backend_fingerprint,
        generated_at: context.generated_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text-table" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

/// Six decimals, round-half-to-even on the exact binary value; never "-0".
pub fn format_score(score: f64) -> String {
    format!("{:.6}", score + 0.0)
}

const NO_MATCHES: &str = "(no eligible matches)";
const HEADERS: [&str; 5] = [
    "Rank",
    "Company",
    "Industry",
    "Cos Similarity",
    "Common Features",
];

fn table_cells(report: &AnalysisReport) -> Vec<[String; 5]> {
    report
        .matches
        .iter()
        .map(|r| {
            [
                r.rank.to_string(),
                r.company.clone(),
                r.industry.clone(),
                format_score(r.score),
                r.common_features.join(", "),
            ]
        })
        .collect()
}

fn widths(rows: &[[String; 5]]) -> [usize; 5] {
    let mut w = HEADERS.map(|h| h.chars().count());
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            w[i] = w[i].max(cell.chars().count());
        }
    }
    w
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

fn describe_filters(f: &SimilarityFilters) -> String {
    let mut parts = Vec::new();
    if f.exclude_company_of_target {
        parts.push("exclude same company".to_string());
    }
    if f.exclude_same_sub_industry {
        parts.push("exclude same sub-industry".to_string());
    }
    if f.exclude_same_industry {
        parts.push("exclude same industry".to_string());
    }
    if let Some(m) = f.min_score {
        parts.push(format!("min score {}", format_score(m)));
    }
    if let Some(years) = &f.allowed_years {
        let ys: Vec<String> = years.iter().map(i32::to_string).collect();
        parts.push(format!("years {}", ys.join("/")));
    }
    for (label, list) in [
        ("exclude companies", &f.exclude_companies),
        ("exclude industries", &f.exclude_industries),
        ("exclude sub-industries", &f.exclude_sub_industries),
    ] {
        if !list.is_empty() {
            parts.push(format!("{label} {}", list.join("/")));
        }
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(", ")
    }
}

fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let t = &report.target;
    let _ = writeln!(
        out,
        "Similarity of cases to {} ({})",
        t.company, t.sub_industry
    );
    let _ = writeln!(out, "Backend: {}", report.backend_fingerprint);
    let _ = writeln!(out, "Filters: {}", describe_filters(&report.filters_used));
    let _ = writeln!(
        out,
        "Generated: {}",
        report
            .generated_at
            .to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    out.push('\n');
    let rows = table_cells(report);
    if rows.is_empty() {
        let _ = writeln!(out, "{NO_MATCHES}");
        return out;
    }
    let w = widths(&rows);
    let line = |cells: [&str; 5]| {
        let padded: Vec<String> = cells.iter().zip(w).map(|(c, w)| pad(c, w)).collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(HEADERS));
    let rule: Vec<String> = w.iter().map(|n| "-".repeat(*n)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for r in &rows {
        let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    if !report.common_to_all.is_empty() {
        let _ = writeln!(out, "\nShared by all: {}", report.common_to_all.join(", "));
    }
    out
}

fn render_markdown(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let t = &report.target;
    let _ = writeln!(
        out,
        "### Similarity of cases to {} ({})\n",
        t.company, t.sub_industry
    );
    let rows: Vec<[String; 5]> = table_cells(report)
        .into_iter()
        .map(|r| r.map(|c| c.replace('|', "\\|")))
        .collect();
    if rows.is_empty() {
        let _ = writeln!(out, "_{NO_MATCHES}_");
        return out;
    }
    let w = widths(&rows);
    let line = |cells: [&str; 5]| {
        let padded: Vec<String> = cells.iter().zip(w).map(|(c, w)| pad(c, w)).collect();
        format!("| {} |", padded.join(" | "))
    };
    let _ = writeln!(out, "{}", line(HEADERS));
    let rule: Vec<String> = w
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let dashes = "-".repeat((*n).max(3) - 1);
            if i == 0 || i == 3 {
                format!("{dashes}:")
            } else {
                format!("{dashes}-")
            }
        })
        .collect();
    let _ = writeln!(out, "| {} |", rule.join(" | "));
    for r in &rows {
        let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    if !report.common_to_all.is_empty() {
        let _ = writeln!(out, "\nShared by all: {}", report.common_to_all.join(", "));
    }
    let _ = writeln!(
        out,
        "\n_Backend: {}. Filters: {}._",
        report.backend_fingerprint,
        describe_filters(&report.filters_used)
    );
    out
}

pub fn render_report(report: &AnalysisReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => render_text(report).into_bytes(),
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(report).expect("report serializes");
            v.push(b'\n');
            v
        }
    }
}
