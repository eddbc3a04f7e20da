//! `dxsim` subcommands. Reports go to stdout, diagnostics to stderr.

use std::collections::BTreeSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dxsim_core::corpus::validate_corpus;
use dxsim_core::report::format_score;
use dxsim_core::{
    render_report, similarity_matrix, FeatureOverlap, ReportFormat, SimilarityFilters,
    DEFAULT_FEATURE_COUNT,
};

use crate::error::CliError;
use crate::pipeline::{self, json_bytes};
use crate::service::{self, ServiceOptions};
use crate::settings::{FileConfig, PipelineArgs, DEFAULT_HOST, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(
    name = "dxsim",
    version,
    about = "Find similar cases across business domains"
)]
pub struct Cli {
    /// TOML file with defaults for any flag; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus file and report every problem line.
    Validate {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Embed the corpus into the cache file.
    Embed {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Rank cases similar to a target case from other domains.
    Similar {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        target: String,
        /// Number of matches (default 2).
        #[arg(long)]
        k: Option<usize>,
        /// Common-feature terms per match.
        #[arg(long, default_value_t = DEFAULT_FEATURE_COUNT)]
        features: usize,
        #[command(flatten)]
        filters: FilterArgs,
        #[arg(long, value_enum, default_value_t = ReportFormatArg::Text)]
        format: ReportFormatArg,
    },
    /// Print the full pairwise similarity matrix.
    Matrix {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
    },
    /// Shared salient terms of two cases.
    CommonFeatures {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = DEFAULT_FEATURE_COUNT)]
        n: usize,
        #[arg(long, value_enum, default_value_t = OverlapFormat::Text)]
        format: OverlapFormat,
    },
    /// Run the HTTP API until interrupted.
    Serve {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
        /// Directory of built UI assets to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Allowed CORS origin (repeatable); any origin when omitted.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Keep candidates from the target's own company.
    #[arg(long)]
    pub include_same_company: bool,
    /// Keep candidates from the target's sub-industry.
    #[arg(long, conflicts_with = "exclude_same_industry")]
    pub include_same_sub_industry: bool,
    /// Drop candidates from the target's industry.
    #[arg(long)]
    pub exclude_same_industry: bool,
    /// Drop candidates scoring below this value.
    #[arg(long)]
    pub min_score: Option<f64>,
    /// Only keep candidates from these years (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub years: Vec<i32>,
    #[arg(long = "exclude-company")]
    pub exclude_companies: Vec<String>,
    #[arg(long = "exclude-industry")]
    pub exclude_industries: Vec<String>,
    #[arg(long = "exclude-sub-industry")]
    pub exclude_sub_industries: Vec<String>,
}

impl FilterArgs {
    pub fn to_filters(&self) -> SimilarityFilters {
        SimilarityFilters {
            exclude_company_of_target: !self.include_same_company,
            exclude_same_sub_industry: !self.include_same_sub_industry,
            exclude_same_industry: self.exclude_same_industry,
            min_score: self.min_score,
            allowed_years: (!self.years.is_empty())
                .then(|| self.years.iter().copied().collect::<BTreeSet<_>>()),
            exclude_companies: self.exclude_companies.clone(),
            exclude_industries: self.exclude_industries.clone(),
            exclude_sub_industries: self.exclude_sub_industries.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Text,
    Markdown,
    Json,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(f: ReportFormatArg) -> Self {
        match f {
            ReportFormatArg::Text => ReportFormat::Text,
            ReportFormatArg::Markdown => ReportFormat::Markdown,
            ReportFormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OverlapFormat {
    Text,
    Json,
}

fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))
}

/// Runs the parsed command; the error carries the exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Validate { corpus } => validate(corpus.or(file.corpus)),
        Command::Embed { pipeline } => {
            let settings = pipeline.resolve(&file)?;
            let Some(cache) = settings.cache.clone() else {
                return Err(CliError::usage("embed needs --cache <path>"));
            };
            let (_, set) = pipeline::embed(&settings)?;
            eprintln!(
                "embedded {} documents with {} into {}",
                set.len(),
                set.backend_fingerprint(),
                cache.display()
            );
            Ok(())
        }
        Command::Similar {
            pipeline,
            target,
            k,
            features,
            filters,
            format,
        } => {
            let settings = pipeline.resolve(&file)?;
            let k = k.or(file.k).unwrap_or(dxsim_core::DEFAULT_K);
            let engine = pipeline::build_engine(&settings)?;
            let report = engine.similar(&target, k, &filters.to_filters(), features, Utc::now())?;
            write_stdout(&render_report(&report, format.into()))
        }
        Command::Matrix { pipeline, format } => {
            let settings = pipeline.resolve(&file)?;
            let (_, set) = pipeline::embed(&settings)?;
            let matrix = similarity_matrix(&set);
            let bytes = match format {
                MatrixFormat::Json => json_bytes(&matrix),
                MatrixFormat::Csv => matrix_csv(&matrix.ids, &matrix.scores)?,
            };
            write_stdout(&bytes)
        }
        Command::CommonFeatures {
            pipeline,
            a,
            b,
            n,
            format,
        } => {
            let settings = pipeline.resolve(&file)?;
            let engine = pipeline::build_engine(&settings)?;
            let overlap = engine.common_features(&a, &b, n)?;
            let bytes = match format {
                OverlapFormat::Json => json_bytes(&overlap),
                OverlapFormat::Text => overlap_text(&overlap).into_bytes(),
            };
            write_stdout(&bytes)
        }
        Command::Serve {
            pipeline,
            port,
            host,
            static_dir,
            cors_origins,
        } => {
            let settings = pipeline.resolve(&file)?;
            let host = host
                .or(file.host)
                .unwrap_or_else(|| DEFAULT_HOST.to_string());
            let port = port.or(file.port).unwrap_or(DEFAULT_PORT);
            let options = ServiceOptions {
                static_dir: static_dir.or(file.static_dir),
                cors_origins: if cors_origins.is_empty() {
                    file.cors_origins.unwrap_or_default()
                } else {
                    cors_origins
                },
            };
            serve(&settings, &host, port, &options)
        }
    }
}

fn validate(corpus: Option<PathBuf>) -> Result<(), CliError> {
    let path = corpus.ok_or_else(|| CliError::usage("--corpus is required"))?;
    let reader = pipeline::open_corpus(&path)?;
    let (docs, errors) = validate_corpus(reader);
    for e in &errors {
        eprintln!("{}: {e}", path.display());
    }
    if errors.is_empty() {
        println!("{} documents OK", docs.len());
        Ok(())
    } else {
        Err(CliError::domain(format!(
            "{} problem(s) found, {} valid documents",
            errors.len(),
            docs.len()
        )))
    }
}

fn matrix_csv(ids: &[String], scores: &[Vec<f64>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("id").chain(ids.iter().map(String::as_str));
    let csv_err = |e: csv::Error| CliError::io(format!("cannot write csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for (id, row) in ids.iter().zip(scores) {
        let cells = std::iter::once(id.clone()).chain(row.iter().map(|&s| format_score(s)));
        w.write_record(cells).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::io(format!("cannot write csv: {e}")))
}

fn overlap_text(o: &FeatureOverlap) -> String {
    let mut s = format!(
        "{} ~ {}  jaccard {}\n",
        o.doc_a,
        o.doc_b,
        format_score(o.jaccard)
    );
    if o.shared_terms.is_empty() {
        s.push_str("(no shared terms)\n");
    }
    let width = o
        .shared_terms
        .iter()
        .map(|t| t.term.chars().count())
        .max()
        .unwrap_or(0);
    for t in &o.shared_terms {
        let pad = width - t.term.chars().count();
        s.push_str(&format!(
            "  {}{}  {}\n",
            t.term,
            " ".repeat(pad),
            format_score(t.weight)
        ));
    }
    s
}

fn serve(
    settings: &crate::settings::PipelineSettings,
    host: &str,
    port: u16,
    options: &ServiceOptions,
) -> Result<(), CliError> {
    let engine = Arc::new(pipeline::build_engine(settings)?);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::usage(format!("invalid listen address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::domain(format!("cannot bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::io(e.to_string()))?;
        eprintln!(
            "serving {} cases ({}) on http://{local}",
            engine.corpus().len(),
            engine.embeddings().backend_fingerprint()
        );
        axum::serve(listener, service::router(engine, options))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| CliError::io(format!("server error: {e}")))?;
        eprintln!("shut down");
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
