//! On-disk layout under the data directory:
//!
//! ```text
//! corpora/<corpus_id>.jsonl   frozen corpus, embeddings included
//! sessions/<session_id>.json  session file
//! ```
//!
//! Every write goes to a temporary file that is renamed over the target, so
//! a crash mid-write leaves the previous version in place.

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use activelabel_core::corpus::ingest_corpus;
use activelabel_core::session::{load_session, save_session};
use activelabel_core::{Corpus, Session};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot encode {0}")]
    Encode(String),
    #[error("injected persist failure")]
    Injected,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    fail_next_persist: AtomicBool,
}

/// Corpus ids are the first 16 hex digits of the corpus fingerprint.
pub fn corpus_id(corpus: &Corpus) -> String {
    corpus.fingerprint()[..16].to_owned()
}

impl Store {
    /// Creates the directory layout and checks that it is writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [root.join("corpora"), root.join("sessions")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let probe = root.join(".write-probe");
        fs::write(&probe, b"ok").map_err(io_err(&probe))?;
        fs::remove_file(&probe).map_err(io_err(&probe))?;
        Ok(Self {
            root,
            fail_next_persist: AtomicBool::new(false),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus_path(&self, id: &str) -> PathBuf {
        self.root.join("corpora").join(format!("{id}.jsonl"))
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    /// Makes the next session persist fail after the temporary file has been
    /// written but before it replaces the stored session. Used by crash tests.
    #[doc(hidden)]
    pub fn inject_persist_failure(&self) {
        self.fail_next_persist.store(true, Ordering::SeqCst);
    }

    fn write_atomic(&self, target: &Path, bytes: &[u8], injectable: bool) -> Result<(), StoreError> {
        let tmp = target.with_extension("tmp");
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        drop(file);
        if injectable && self.fail_next_persist.swap(false, Ordering::SeqCst) {
            return Err(StoreError::Injected);
        }
        fs::rename(&tmp, target).map_err(io_err(target))
    }

    pub fn save_corpus(&self, corpus: &Corpus) -> Result<String, StoreError> {
        let id = corpus_id(corpus);
        let path = self.corpus_path(&id);
        if !path.exists() {
            self.write_atomic(&path, &corpus.to_jsonl(), false)?;
        }
        Ok(id)
    }

    pub fn persist_session(&self, id: &str, session: &Session) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        save_session(session, &mut buf).map_err(|e| StoreError::Encode(e.to_string()))?;
        self.write_atomic(&self.session_path(id), &buf, true)
    }

    pub fn load_corpora(&self) -> HashMap<String, Arc<Corpus>> {
        let mut out = HashMap::new();
        for path in files_with_extension(&self.root.join("corpora"), "jsonl") {
            let loaded = fs::File::open(&path)
                .map_err(|e| e.to_string())
                .and_then(|f| ingest_corpus(BufReader::new(f)).map_err(|e| e.to_string()));
            match loaded {
                Ok(corpus) => {
                    out.insert(corpus_id(&corpus), Arc::new(corpus));
                }
                Err(e) => tracing::error!(path = %path.display(), error = %e, "skipping unreadable corpus"),
            }
        }
        out
    }

    /// Reloads every stored session whose corpus is available.
    pub fn load_sessions(&self, corpora: &HashMap<String, Arc<Corpus>>) -> HashMap<String, Session> {
        let mut out = HashMap::new();
        for path in files_with_extension(&self.root.join("sessions"), "json") {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            match self.load_session_file(&path, corpora) {
                Ok(session) => {
                    out.insert(id, session);
                }
                Err(e) => tracing::error!(path = %path.display(), error = %e, "skipping unreadable session"),
            }
        }
        out
    }

    fn load_session_file(&self, path: &Path, corpora: &HashMap<String, Arc<Corpus>>) -> Result<Session, String> {
        let bytes = fs::read(path).map_err(|e| e.to_string())?;
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        let fingerprint = value["state"]["corpus_fingerprint"]
            .as_str()
            .ok_or("session file lacks a corpus fingerprint")?;
        let corpus = corpora
            .get(fingerprint.get(..16).unwrap_or_default())
            .ok_or("corpus not found")?;
        load_session(&bytes[..], corpus.clone()).map_err(|e| e.to_string())
    }
}

fn files_with_extension(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    files
}
