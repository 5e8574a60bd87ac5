//! Resolving missing document embeddings before a corpus is frozen.

use std::fmt;
use std::str::FromStr;

use activelabel_core::Corpus;

use crate::backend::{BackendClient, BackendError};

/// Salt used by the built-in hashing embedder everywhere in the service.
pub const HASH_SALT: u64 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedSource {
    Hash(usize),
    Backend(String),
}

impl FromStr for EmbedSource {
    type Err = String;

    /// `hash:<dim>` or `backend:<url>`.
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(dim) = s.strip_prefix("hash:") {
            let dim: usize = dim.parse().map_err(|_| format!("invalid hash dimension {dim:?}"))?;
            if dim == 0 {
                return Err("hash dimension must be >= 1".into());
            }
            Ok(EmbedSource::Hash(dim))
        } else if let Some(url) = s.strip_prefix("backend:") {
            if url.is_empty() {
                return Err("backend URL is empty".into());
            }
            Ok(EmbedSource::Backend(url.to_owned()))
        } else {
            Err(format!("expected hash:<dim> or backend:<url>, got {s:?}"))
        }
    }
}

impl fmt::Display for EmbedSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedSource::Hash(d) => write!(f, "hash:{d}"),
            EmbedSource::Backend(u) => write!(f, "backend:{u}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Corpus(#[from] activelabel_core::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Fills every missing embedding. Documents that already carry one are left
/// untouched.
pub async fn resolve_embeddings(
    corpus: Corpus,
    hash_dim: Option<usize>,
    backend: Option<&BackendClient>,
) -> Result<Corpus, EmbedError> {
    if corpus.all_embedded() {
        return Ok(corpus);
    }
    if let Some(client) = backend {
        let texts: Vec<String> = corpus.missing_embeddings().map(|d| d.text.clone()).collect();
        let vectors = client.fetch_all(&texts).await?;
        return Ok(corpus.fill_missing(vectors)?);
    }
    match hash_dim {
        Some(dim) => Ok(corpus.with_hash_embeddings(dim, HASH_SALT)?),
        None => Ok(corpus),
    }
}
