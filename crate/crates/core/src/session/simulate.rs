//! Oracle-driven runs: every query is answered with the gold label.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::classifier::{train_head, Matrix};
use crate::corpus::{split_pool_test, Corpus};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Metrics};

use super::{Phase, RoundRecord, Session, SessionConfig};

/// Runs a session to completion and returns it.
pub fn simulate_session(corpus: Arc<Corpus>, config: SessionConfig) -> Result<Session> {
    if let Some(doc) = corpus.documents().iter().find(|d| d.gold_label.is_none()) {
        return Err(Error::MissingGoldLabel(doc.id.clone()));
    }
    let mut session = Session::create(corpus, config)?;
    while session.phase() != Phase::Done {
        let batch = session.next_batch()?;
        let labels: BTreeMap<String, String> = batch
            .items
            .into_iter()
            .map(|item| {
                let gold = session.corpus().get(&item.id).and_then(|d| d.gold_label.clone());
                (item.id, gold.expect("checked above"))
            })
            .collect();
        session.submit_labels(&labels)?;
    }
    Ok(session)
}

pub fn run_simulation(corpus: Arc<Corpus>, config: SessionConfig) -> Result<Vec<RoundRecord>> {
    Ok(simulate_session(corpus, config)?.state.history)
}

/// Test metrics of a head trained on every pool document's gold label,
/// using the same split as a session with `config`.
pub fn full_pool_reference(corpus: &Corpus, config: &SessionConfig) -> Result<Metrics> {
    let labels = if config.label_set.is_empty() { corpus.label_set() } else { &config.label_set[..] };
    let (pool, test) = split_pool_test(corpus, config.test_fraction, config.rng_seed)?;
    let dim = corpus.dim().ok_or(Error::Empty("embeddings"))?;
    let encode = |ids: &[String]| -> Result<(Matrix, Vec<usize>)> {
        let mut rows = Vec::with_capacity(ids.len());
        let mut y = Vec::with_capacity(ids.len());
        for id in ids {
            let doc = corpus.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            let gold = doc.gold_label.as_deref().ok_or_else(|| Error::MissingGoldLabel(id.clone()))?;
            let class = labels
                .iter()
                .position(|l| l == gold)
                .ok_or_else(|| Error::UnknownLabel(gold.to_owned()))?;
            rows.push(doc.embedding.as_deref().ok_or_else(|| Error::MissingEmbedding(id.clone()))?);
            y.push(class);
        }
        Ok((Matrix::from_rows(dim, rows)?, y))
    };
    let (x_pool, y_pool) = encode(&pool)?;
    let (x_test, y_test) = encode(&test)?;
    let head = train_head(&x_pool, &y_pool, labels, &config.train)?.head;
    evaluate(&head, &x_test, &y_test)
}

/// Labels used at the first round whose macro-F1 reaches `target`.
pub fn labels_to_reach(history: &[RoundRecord], target: f64) -> Option<usize> {
    history
        .iter()
        .find(|r| r.macro_f1.is_some_and(|f| f >= target))
        .map(|r| r.n_labeled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::synthetic::{generate, SyntheticConfig};

    #[test]
    fn requires_gold_everywhere() {
        let mut docs: Vec<Document> = generate(&SyntheticConfig { n_docs: 30, ..SyntheticConfig::default() })
            .unwrap()
            .documents()
            .to_vec();
        docs[3].gold_label = None;
        let corpus = Corpus::new(docs).unwrap();
        let config = SessionConfig { n_seed: 5, ..SessionConfig::for_corpus(&corpus) };
        assert!(matches!(run_simulation(Arc::new(corpus), config), Err(Error::MissingGoldLabel(_))));
    }

    #[test]
    fn labels_to_reach_picks_first_round() {
        let mk = |n, f| RoundRecord {
            round: 0,
            n_labeled: n,
            macro_f1: Some(f),
            accuracy: None,
            per_class_f1: Default::default(),
            confusion: None,
            queried_ids: vec![],
            minority_fraction: None,
            wall_time_ms: 0,
        };
        let h = [mk(160, 0.5), mk(200, 0.81), mk(240, 0.79), mk(280, 0.9)];
        assert_eq!(labels_to_reach(&h, 0.8), Some(200));
        assert_eq!(labels_to_reach(&h, 0.95), None);
    }
}
