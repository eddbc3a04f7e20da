//! HTTP client for an external embedding service.
//!
//! Wire protocol: `POST {endpoint}/embed` with `{"model": ..., "texts": [...]}`;
//! a 200 response carries `{"dim": N, "vectors": [[...], ...]}` in request
//! order. Anything other than 200 is treated as the backend being down.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{l2_normalize, Embedder, EmbeddingError, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

fn embed_url(endpoint: &str) -> String {
    format!("{}/embed", endpoint.trim_end_matches('/'))
}

/// Validates arity and shape of a decoded response against the request.
fn check_response(
    response: EmbedResponse,
    expected_len: usize,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    if response.vectors.len() != expected_len {
        return Err(EmbeddingError::ProtocolError(format!(
            "sent {expected_len} texts, received {} vectors",
            response.vectors.len()
        )));
    }
    if response.dim == 0 {
        return Err(EmbeddingError::ProtocolError("response dim is 0".into()));
    }
    for v in &response.vectors {
        if v.len() != response.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: response.dim,
                actual: v.len(),
            });
        }
    }
    Ok(response.vectors)
}

pub fn request_embeddings(
    agent: &ureq::Agent,
    endpoint: &str,
    model_name: &str,
    texts: &[String],
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    if texts.is_empty() {
        return Err(EmbeddingError::InvalidConfig(
            "empty embedding batch".into(),
        ));
    }
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(EmbeddingError::EmptyText);
    }
    let body = EmbedRequest {
        model: model_name.to_string(),
        texts: texts.to_vec(),
    };
    let response = match agent.post(&embed_url(endpoint)).send_json(&body) {
        Ok(r) => r,
        Err(ureq::Error::Status(code, _)) => {
            return Err(EmbeddingError::BackendUnavailable(format!(
                "HTTP status {code}"
            )))
        }
        Err(ureq::Error::Transport(t)) => {
            return Err(EmbeddingError::BackendUnavailable(t.to_string()))
        }
    };
    if response.status() != 200 {
        return Err(EmbeddingError::BackendUnavailable(format!(
            "HTTP status {}",
            response.status()
        )));
    }
    let body = response
        .into_string()
        .map_err(|e| EmbeddingError::BackendUnavailable(format!("reading response: {e}")))?;
    let decoded: EmbedResponse = serde_json::from_str(&body)
        .map_err(|e| EmbeddingError::ProtocolError(format!("decoding response: {e}")))?;
    check_response(decoded, texts.len())
}

/// Embedder backed by [`request_embeddings`]. Vectors are L2-normalized on
/// receipt and must have exactly the configured dimension.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    endpoint: String,
    model_name: String,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        dim: usize,
        timeout: Duration,
    ) -> Result<Self, EmbeddingError> {
        let endpoint = endpoint.into();
        if endpoint.is_empty() {
            return Err(EmbeddingError::InvalidConfig(
                "remote backend needs an endpoint".into(),
            ));
        }
        if dim == 0 {
            return Err(EmbeddingError::InvalidConfig("dim must be >= 1".into()));
        }
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Ok(Self {
            agent,
            endpoint,
            model_name: model_name.into(),
            dim,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("remote:model={}:dim={}", self.model_name, self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let raw = request_embeddings(&self.agent, &self.endpoint, &self.model_name, texts)?;
        raw.into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(EmbeddingError::DimensionMismatch {
                        expected: self.dim,
                        actual: v.len(),
                    });
                }
                l2_normalize(&v)
            })
            .collect()
    }
}
