//! Session files: one JSON document `{"version": 1, "checksum": ..., "state": ...}`.
//!
//! The checksum is the SHA-256 of the compact JSON encoding of `state`.
//! Floats are written in shortest round-trip form, so head weights reload
//! bit-exactly.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

use super::{Session, SessionState};

pub const SESSION_FILE_VERSION: u64 = 1;

#[derive(Serialize)]
struct SessionFileRef<'a> {
    version: u64,
    checksum: String,
    state: &'a SessionState,
}

fn checksum(state: &SessionState) -> Result<String> {
    let bytes = serde_json::to_vec(state).map_err(|e| Error::Corrupted(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn save_session<W: Write>(session: &Session, out: W) -> Result<()> {
    let file = SessionFileRef {
        version: SESSION_FILE_VERSION,
        checksum: checksum(&session.state)?,
        state: &session.state,
    };
    serde_json::to_writer(out, &file).map_err(|e| Error::Io(e.to_string()))
}

/// Loads a session saved by [`save_session`] against the corpus it was
/// created from.
pub fn load_session<R: Read>(input: R, corpus: Arc<Corpus>) -> Result<Session> {
    let mut value: Value = serde_json::from_reader(input).map_err(|e| Error::Corrupted(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Corrupted("missing version".into()))?;
    if version != SESSION_FILE_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let expected = value
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Corrupted("missing checksum".into()))?
        .to_owned();
    let state = value
        .get_mut("state")
        .map(Value::take)
        .ok_or_else(|| Error::Corrupted("missing state".into()))?;
    let state: SessionState = serde_json::from_value(state).map_err(|e| Error::Corrupted(e.to_string()))?;
    if checksum(&state)? != expected {
        return Err(Error::Corrupted("checksum mismatch".into()));
    }
    Session::from_parts(corpus, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::SessionConfig;
    use crate::synthetic::{generate, SyntheticConfig};
    use std::collections::BTreeMap;

    fn session() -> Session {
        let corpus = generate(&SyntheticConfig { n_docs: 80, ..SyntheticConfig::default() }).unwrap();
        let config = SessionConfig { n_seed: 10, batch_size: 5, ..SessionConfig::for_corpus(&corpus) };
        Session::create(Arc::new(corpus), config).unwrap()
    }

    fn saved(s: &Session) -> Vec<u8> {
        let mut buf = Vec::new();
        save_session(s, &mut buf).unwrap();
        buf
    }

    #[test]
    fn fresh_session_round_trips() {
        let s = session();
        let loaded = load_session(&saved(&s)[..], s.corpus().clone()).unwrap();
        assert_eq!(loaded.state(), s.state());
    }

    #[test]
    fn mid_round_round_trip_keeps_pending() {
        let mut s = session();
        let ids = s.state().pending_batch.clone();
        let labels: BTreeMap<String, String> = ids
            .iter()
            .map(|id| (id.clone(), s.corpus().get(id).unwrap().gold_label.clone().unwrap()))
            .collect();
        s.submit_labels(&labels).unwrap();
        let first = s.state().pending_batch[0].clone();
        let partial = BTreeMap::from([(first.clone(), "Legality".to_string())]);
        s.submit_labels(&partial).unwrap();
        let loaded = load_session(&saved(&s)[..], s.corpus().clone()).unwrap();
        assert_eq!(loaded.state(), s.state());
        assert_eq!(loaded.next_batch().unwrap(), s.next_batch().unwrap());
        assert_eq!(loaded.state().current_head, s.state().current_head);
    }

    #[test]
    fn tampering_is_detected() {
        let s = session();
        let text = String::from_utf8(saved(&s)).unwrap();
        let tampered = text.replacen("\"round\":0", "\"round\":3", 1);
        assert_ne!(tampered, text);
        assert!(matches!(load_session(tampered.as_bytes(), s.corpus().clone()), Err(Error::Corrupted(_))));
        assert!(matches!(load_session(&text.as_bytes()[..40], s.corpus().clone()), Err(Error::Corrupted(_))));
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert_eq!(load_session(bumped.as_bytes(), s.corpus().clone()).unwrap_err(), Error::VersionMismatch(2));
    }

    #[test]
    fn wrong_corpus_is_rejected() {
        let s = session();
        let other = generate(&SyntheticConfig { n_docs: 80, seed: 9, ..SyntheticConfig::default() }).unwrap();
        assert!(matches!(load_session(&saved(&s)[..], Arc::new(other)), Err(Error::Corrupted(_))));
    }
}
