//! JSON HTTP API over an immutable [`Engine`].
//!
//! Routes:
//! - `GET  /api/cases?industry=&page=&page_size=`
//! - `GET  /api/cases/{id}`
//! - `POST /api/similar` `{"target", "k", "filters", "n"}`
//! - `POST /api/whatif` `{"text", "k", "filters", "n"}`
//! - `GET  /api/common-features?a=&b=&n=`
//! - `GET  /api/health`
//!
//! Errors are JSON objects with an `error` tag. Report bodies are the same
//! bytes `dxsim similar --format json` prints.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use dxsim_core::corpus::CaseSummary;
use dxsim_core::{
    render_report, EmbeddingError, Engine, EngineError, ReportFormat, SimilarityFilters,
    DEFAULT_FEATURE_COUNT, DEFAULT_K,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::error::error_tag;
use crate::pipeline::json_bytes;

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 200;

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Built UI assets, served for every path outside `/api`.
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
}

pub fn router(engine: Arc<Engine>, options: &ServiceOptions) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/cases", get(list_cases))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/similar", post(similar))
        .route("/api/whatif", post(whatif))
        .route("/api/common-features", get(common_features))
        .with_state(AppState { engine });

    let cors = if options.cors_origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = options
            .cors_origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        CorsLayer::new().allow_origin(AllowOrigin::list(origins))
    }
    .allow_methods(Any)
    .allow_headers(Any);

    let app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => {
            api.fallback(|| async { error(StatusCode::NOT_FOUND, "not_found", "no such route") })
        }
    };
    app.layer(cors)
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, tag: &str, message: impl std::fmt::Display) -> Response {
    json_response(
        status,
        json_bytes(&json!({"error": tag, "message": message.to_string()})),
    )
}

fn bad_request(message: impl std::fmt::Display) -> Response {
    error(StatusCode::BAD_REQUEST, "bad_request", message)
}

fn engine_error(err: EngineError) -> Response {
    let tag = error_tag(&err);
    match &err {
        EngineError::UnknownId(id) => json_response(
            StatusCode::NOT_FOUND,
            json_bytes(&json!({"error": tag, "id": id})),
        ),
        EngineError::EmptyCandidatePool | EngineError::EmptyText => {
            error(StatusCode::UNPROCESSABLE_ENTITY, tag, &err)
        }
        EngineError::InvalidRequest(_) => error(StatusCode::BAD_REQUEST, tag, &err),
        EngineError::Embedding(e) if !matches!(e.root(), EmbeddingError::EmptyText) => {
            error(StatusCode::BAD_GATEWAY, tag, &err)
        }
        _ => error(StatusCode::INTERNAL_SERVER_ERROR, tag, &err),
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    corpus_size: usize,
    dim: usize,
}

async fn health(State(state): State<AppState>) -> Response {
    json_response(
        StatusCode::OK,
        json_bytes(&Health {
            status: "ok",
            corpus_size: state.engine.corpus().len(),
            dim: state.engine.dim(),
        }),
    )
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CasePage {
    pub cases: Vec<CaseSummary>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

fn positive_param(
    params: &HashMap<String, String>,
    key: &str,
    default: usize,
) -> Result<usize, String> {
    match params.get(key) {
        None => Ok(default),
        Some(raw) => match raw.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(format!("{key} must be a positive integer, got '{raw}'")),
        },
    }
}

async fn list_cases(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let page = match positive_param(&params, "page", 1) {
        Ok(p) => p,
        Err(msg) => return bad_request(msg),
    };
    let page_size = match positive_param(&params, "page_size", DEFAULT_PAGE_SIZE) {
        Ok(s) => s.min(MAX_PAGE_SIZE),
        Err(msg) => return bad_request(msg),
    };
    let industry = params
        .get("industry")
        .map(String::as_str)
        .filter(|s| !s.is_empty());
    let all = state.engine.corpus().list_cases(industry);
    let total = all.len();
    let cases = all
        .into_iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .collect();
    json_response(
        StatusCode::OK,
        json_bytes(&CasePage {
            cases,
            total,
            page,
            page_size,
        }),
    )
}

async fn get_case(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.engine.corpus().get_case(&id) {
        Ok(doc) => json_response(StatusCode::OK, json_bytes(doc)),
        Err(_) => engine_error(EngineError::UnknownId(id)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarRequest {
    pub target: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub filters: SimilarityFilters,
    /// Common-feature terms per match.
    #[serde(default = "default_n")]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub text: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub filters: SimilarityFilters,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_n() -> usize {
    DEFAULT_FEATURE_COUNT
}

fn report_response(report: Result<dxsim_core::AnalysisReport, EngineError>) -> Response {
    match report {
        Ok(r) => json_response(StatusCode::OK, render_report(&r, ReportFormat::Json)),
        Err(e) => engine_error(e),
    }
}

async fn similar(
    State(state): State<AppState>,
    body: Result<Json<SimilarRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(rej) => return bad_request(rej.body_text()),
    };
    report_response(
        state
            .engine
            .similar(&req.target, req.k, &req.filters, req.n, Utc::now()),
    )
}

async fn whatif(
    State(state): State<AppState>,
    body: Result<Json<WhatIfRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(rej) => return bad_request(rej.body_text()),
    };
    // remote backends block on network I/O
    let engine = state.engine.clone();
    let joined = tokio::task::spawn_blocking(move || {
        engine.what_if(&req.text, req.k, &req.filters, req.n, Utc::now())
    })
    .await;
    match joined {
        Ok(result) => report_response(result),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e),
    }
}

async fn common_features(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let (Some(a), Some(b)) = (params.get("a"), params.get("b")) else {
        return bad_request("query parameters a and b are required");
    };
    let n = match positive_param(&params, "n", DEFAULT_FEATURE_COUNT) {
        Ok(n) => n,
        Err(msg) => return bad_request(msg),
    };
    match state.engine.common_features(a, b, n) {
        Ok(overlap) => json_response(StatusCode::OK, json_bytes(&overlap)),
        Err(e) => engine_error(e),
    }
}
