//! Loading inputs and assembling an [`Engine`] from resolved settings.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use dxsim_core::embedding::{CacheError, EmbeddingSet};
use dxsim_core::{
    embed_corpus, ingest_corpus, Corpus, CorpusError, CorpusFormat, EmbedOptions, Embedder,
    EmbeddingCache, Engine, EngineOptions, NormalizationConfig, Preprocessor, StopwordList,
};
use serde::Serialize;

use crate::error::{embedding_tag, CliError};
use crate::settings::PipelineSettings;

pub fn open_corpus(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("cannot open corpus {}: {e}", path.display())))
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    ingest_corpus(open_corpus(path)?, CorpusFormat::JsonLines).map_err(|e| match e {
        CorpusError::Read(_) => CliError::io(format!("{}: {e}", path.display())),
        other => CliError::domain(format!("{}: {other}", path.display())),
    })
}

pub fn load_preprocessor(stopwords: Option<&Path>) -> Result<Preprocessor, CliError> {
    let config = NormalizationConfig::default();
    let list = match stopwords {
        None => StopwordList::builtin(&config),
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                CliError::io(format!("cannot open stopwords {}: {e}", path.display()))
            })?;
            StopwordList::from_reader(BufReader::new(file), path.display().to_string(), &config)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?
        }
    };
    Ok(Preprocessor::new(config, list))
}

fn cache_error(e: CacheError) -> CliError {
    match e {
        CacheError::Io { .. } => CliError::io(e.to_string()),
        CacheError::Malformed { .. } => CliError::domain(e.to_string()),
    }
}

pub fn open_cache(path: Option<&Path>) -> Result<Option<EmbeddingCache>, CliError> {
    path.map(|p| EmbeddingCache::open(p).map_err(cache_error))
        .transpose()
}

pub fn save_cache(cache: Option<&EmbeddingCache>) -> Result<(), CliError> {
    cache.map_or(Ok(()), |c| c.save().map_err(cache_error))
}

pub fn build_embedder(settings: &PipelineSettings) -> Result<Arc<dyn Embedder>, CliError> {
    settings
        .backend
        .build()
        .map(Arc::from)
        .map_err(|e| CliError::usage(e.to_string()))
}

/// Embeds the corpus through the configured cache, saving it afterwards.
pub fn embed(settings: &PipelineSettings) -> Result<(Corpus, EmbeddingSet), CliError> {
    let corpus = load_corpus(&settings.corpus)?;
    let preprocessor = load_preprocessor(settings.stopwords.as_deref())?;
    let embedder = build_embedder(settings)?;
    let cache = open_cache(settings.cache.as_deref())?;
    let set = embed_corpus(
        embedder.as_ref(),
        &corpus,
        &preprocessor,
        cache.as_ref(),
        EmbedOptions::default(),
    )
    .map_err(|e| CliError::domain(format!("{}: {e}", embedding_tag(&e))))?;
    save_cache(cache.as_ref())?;
    Ok((corpus, set))
}

pub fn build_engine(settings: &PipelineSettings) -> Result<Engine, CliError> {
    let corpus = load_corpus(&settings.corpus)?;
    let preprocessor = load_preprocessor(settings.stopwords.as_deref())?;
    let embedder = build_embedder(settings)?;
    let cache = open_cache(settings.cache.as_deref())?;
    let engine = Engine::build(
        corpus,
        preprocessor,
        embedder,
        cache.as_ref(),
        EngineOptions::default(),
    )?;
    save_cache(cache.as_ref())?;
    Ok(engine)
}

/// Pretty JSON plus a trailing newline; the one encoding used for every JSON
/// body, so CLI output and HTTP responses compare byte for byte.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("response types serialize");
    out.push(b'\n');
    out
}
