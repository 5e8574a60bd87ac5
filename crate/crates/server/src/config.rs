use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::embedding::EmbedSource;

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_body_limit() -> usize {
    64 * 1024 * 1024
}

fn default_timeout() -> u64 {
    30
}

/// Read from a TOML file by `activelabel serve --config`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Base URL of an embedding backend, e.g. `http://127.0.0.1:9000`.
    #[serde(default)]
    pub backend_url: Option<String>,
    #[serde(default = "default_timeout")]
    pub backend_timeout_secs: u64,
    /// Dimension for the built-in hashing embedder, used when no backend is set.
    #[serde(default)]
    pub hash_embed_dim: Option<usize>,
    #[serde(default = "default_body_limit")]
    pub max_body_bytes: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            listen: default_listen(),
            data_dir: data_dir.into(),
            backend_url: None,
            backend_timeout_secs: default_timeout(),
            hash_embed_dim: None,
            max_body_bytes: default_body_limit(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.listen.port() == 0 {
            return Err(ConfigError::Invalid("listen port must be in 1..=65535".into()));
        }
        if self.hash_embed_dim == Some(0) {
            return Err(ConfigError::Invalid("hash_embed_dim must be >= 1".into()));
        }
        if self.max_body_bytes == 0 {
            return Err(ConfigError::Invalid("max_body_bytes must be positive".into()));
        }
        Ok(())
    }

    pub fn backend_timeout(&self) -> Duration {
        Duration::from_secs(self.backend_timeout_secs)
    }

    /// How documents without embeddings get one, if at all.
    pub fn embed_source(&self) -> Option<EmbedSource> {
        match (&self.backend_url, self.hash_embed_dim) {
            (Some(url), _) => Some(EmbedSource::Backend(url.clone())),
            (None, Some(dim)) => Some(EmbedSource::Hash(dim)),
            (None, None) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full() {
        let c = ServiceConfig::from_toml("data_dir = \"/tmp/x\"").unwrap();
        assert_eq!(c.listen.port(), 8080);
        assert_eq!(c.embed_source(), None);
        let c = ServiceConfig::from_toml(
            "listen = \"0.0.0.0:9001\"\ndata_dir = \"d\"\nhash_embed_dim = 32\nmax_body_bytes = 1024\n",
        )
        .unwrap();
        assert_eq!(c.embed_source(), Some(EmbedSource::Hash(32)));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("data_dir = \"d\"\nlisten = \"127.0.0.1:0\"").is_err());
        assert!(ServiceConfig::from_toml("data_dir = \"d\"\nhash_embed_dim = 0").is_err());
        assert!(ServiceConfig::from_toml("data_dir = \"d\"\nbogus = 1").is_err());
        assert!(ServiceConfig::from_toml("listen = \"127.0.0.1:80\"").is_err());
    }
}
