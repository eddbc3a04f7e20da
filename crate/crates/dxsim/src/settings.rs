//! Flag and config-file resolution. Command-line flags win over the config
//! file; `DXSIM_ENDPOINT` is consulted only when neither sets an endpoint.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use dxsim_core::embedding::BackendConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const ENDPOINT_ENV: &str = "DXSIM_ENDPOINT";
pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_HOST: &str = "127.0.0.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Hashed,
    Remote,
}

/// Flags shared by every subcommand that builds embeddings.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// JSONL corpus file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Stopword file (one token per line, '#' comments). Defaults to the built-in list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Hashed backend seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remote backend base URL (falls back to DXSIM_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Remote backend model name.
    #[arg(long)]
    pub model: Option<String>,
    /// Remote request timeout in milliseconds.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Embedding cache file (JSONL); created if missing.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

/// Keys accepted in `--config` files. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_ms: Option<u64>,
    pub cache: Option<PathBuf>,
    pub k: Option<usize>,
    pub port: Option<u16>,
    pub host: Option<String>,
    pub static_dir: Option<PathBuf>,
    pub cors_origins: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus,
            &mut cfg.stopwords,
            &mut cfg.cache,
            &mut cfg.static_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub corpus: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub backend: BackendConfig,
    pub cache: Option<PathBuf>,
}

impl PipelineArgs {
    /// Merges flags over `file`, rejecting combinations that name options of
    /// the backend that is not selected.
    pub fn resolve(&self, file: &FileConfig) -> Result<PipelineSettings, CliError> {
        let corpus = self
            .corpus
            .clone()
            .or_else(|| file.corpus.clone())
            .ok_or_else(|| CliError::usage("--corpus is required"))?;
        let kind = self.backend.or(file.backend).unwrap_or(BackendKind::Hashed);
        let dim = self.dim.or(file.dim).unwrap_or(DEFAULT_DIM);
        if dim == 0 {
            return Err(CliError::usage("--dim must be positive"));
        }
        let backend = match kind {
            BackendKind::Hashed => {
                for (flag, set) in [
                    ("--endpoint", self.endpoint.is_some()),
                    ("--model", self.model.is_some()),
                    ("--timeout-ms", self.timeout_ms.is_some()),
                ] {
                    if set {
                        return Err(CliError::usage(format!(
                            "{flag} only applies to --backend remote"
                        )));
                    }
                }
                BackendConfig::Hashed {
                    dim,
                    seed: self.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
                }
            }
            BackendKind::Remote => {
                if self.seed.is_some() {
                    return Err(CliError::usage("--seed only applies to --backend hashed"));
                }
                let endpoint = self
                    .endpoint
                    .clone()
                    .or_else(|| file.endpoint.clone())
                    .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
                    .ok_or_else(|| {
                        CliError::usage(format!(
                            "--backend remote needs --endpoint or {ENDPOINT_ENV}"
                        ))
                    })?;
                let model_name = self
                    .model
                    .clone()
                    .or_else(|| file.model.clone())
                    .ok_or_else(|| CliError::usage("--backend remote needs --model"))?;
                BackendConfig::Remote {
                    endpoint,
                    model_name,
                    dim,
                    timeout: Duration::from_millis(
                        self.timeout_ms
                            .or(file.timeout_ms)
                            .unwrap_or(DEFAULT_TIMEOUT_MS),
                    ),
                }
            }
        };
        Ok(PipelineSettings {
            corpus,
            stopwords: self.stopwords.clone().or_else(|| file.stopwords.clone()),
            backend,
            cache: self.cache.clone().or_else(|| file.cache.clone()),
        })
    }
}
