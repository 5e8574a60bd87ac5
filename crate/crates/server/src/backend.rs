//! Client for the embedding backend wire protocol.
//!
//! `POST {base}/embed` with `{"texts": [..]}` answers `200 {"embeddings": [[..], ..]}`
//! with one row per text, or a non-200 status with `{"error": ".."}`.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Transient failures are retried this many times after the first attempt.
pub const MAX_RETRIES: usize = 3;
/// Texts per request in [`BackendClient::fetch_all`].
pub const DEFAULT_CHUNK: usize = 64;

#[derive(Debug, Serialize)]
pub struct EmbedRequest<'a> {
    pub texts: &'a [String],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BackendError {
    #[error("no texts to embed")]
    EmptyInput,
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("count mismatch: sent {sent} texts, received {received} embeddings")]
    CountMismatch { sent: usize, received: usize },
    #[error("dimension drift: expected {expected}, got {got}")]
    DimensionDrift { expected: usize, got: usize },
}

impl BackendError {
    fn is_transient(&self) -> bool {
        match self {
            BackendError::Unreachable(_) => true,
            BackendError::Status { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

#[derive(Debug)]
pub struct BackendClient {
    base_url: String,
    http: reqwest::Client,
    dim: Mutex<Option<usize>>,
    retry_delay: Duration,
}

impl BackendClient {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            http,
            dim: Mutex::new(None),
            retry_delay: Duration::from_millis(100),
        })
    }

    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Dimension learned from the first successful response.
    pub fn dim(&self) -> Option<usize> {
        *self.dim.lock().expect("dim lock")
    }

    async fn attempt(&self, texts: &[String]) -> Result<EmbedResponse, BackendError> {
        let response = self
            .http
            .post(format!("{}/embed", self.base_url))
            .json(&EmbedRequest { texts })
            .send()
            .await
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let status = response.status();
        let body = response
            .bytes()
            .await
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        if !status.is_success() {
            let message = serde_json::from_slice::<ErrorBody>(&body)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&body).into_owned());
            return Err(BackendError::Status {
                status: status.as_u16(),
                message,
            });
        }
        serde_json::from_slice(&body).map_err(|e| BackendError::Malformed(e.to_string()))
    }

    /// One vector per text, in order. Transient failures (connection errors,
    /// 5xx, 429) are retried up to [`MAX_RETRIES`] times.
    pub async fn fetch_embeddings(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let mut tries = 0;
        let response = loop {
            match self.attempt(texts).await {
                Ok(r) => break r,
                Err(e) if e.is_transient() && tries < MAX_RETRIES => {
                    tries += 1;
                    tracing::warn!(error = %e, attempt = tries, "retrying embedding request");
                    tokio::time::sleep(self.retry_delay * tries as u32).await;
                }
                Err(e) => return Err(e),
            }
        };
        self.validate(texts.len(), response.embeddings)
    }

    fn validate(&self, sent: usize, embeddings: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, BackendError> {
        if embeddings.len() != sent {
            return Err(BackendError::CountMismatch {
                sent,
                received: embeddings.len(),
            });
        }
        let mut known = self.dim.lock().expect("dim lock");
        let expected = known.unwrap_or(embeddings[0].len());
        if expected == 0 {
            return Err(BackendError::Malformed("empty embedding".into()));
        }
        for e in &embeddings {
            if e.len() != expected {
                return Err(BackendError::DimensionDrift {
                    expected,
                    got: e.len(),
                });
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(BackendError::Malformed("non-finite embedding component".into()));
            }
        }
        *known = Some(expected);
        Ok(embeddings)
    }

    /// Like [`fetch_embeddings`](Self::fetch_embeddings) but split into
    /// requests of at most [`DEFAULT_CHUNK`] texts.
    pub async fn fetch_all(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(DEFAULT_CHUNK) {
            out.extend(self.fetch_embeddings(chunk).await?);
        }
        Ok(out)
    }
}
