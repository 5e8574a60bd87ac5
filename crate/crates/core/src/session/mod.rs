//! The annotation loop as a single-writer state machine.
//!
//! Round 0 labels the random seed batch. Completing any batch retrains the
//! head from scratch on every labeled document, evaluates it on the held-out
//! split when gold labels exist there, appends a [`RoundRecord`] and then
//! either stops or queries the next batch from the remaining pool.

mod export;
mod persist;
mod simulate;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{train_head, LinearHead, Matrix, TrainConfig};
use crate::corpus::{split_pool_test, Corpus, Document};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Metrics};
use crate::rng;
use crate::strategies::{score_documents, select_query_batch, select_seed, QueryStrategy};

pub use export::export_history;
pub use persist::{load_session, save_session, SESSION_FILE_VERSION};
pub use simulate::{full_pool_reference, labels_to_reach, run_simulation, simulate_session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Head row order. Left empty, it is taken from the corpus gold labels.
    pub label_set: Vec<String>,
    pub test_fraction: f64,
    pub n_seed: usize,
    pub batch_size: usize,
    pub max_rounds: u32,
    pub strategy: QueryStrategy,
    pub rng_seed: u64,
    pub train: TrainConfig,
    /// Stop once the test macro-F1 reaches this value. Needs gold test labels.
    pub stop_f1_threshold: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            label_set: Vec::new(),
            test_fraction: 0.2,
            n_seed: 160,
            batch_size: 40,
            max_rounds: 10,
            strategy: QueryStrategy::Margin,
            rng_seed: 0,
            train: TrainConfig::default(),
            stop_f1_threshold: None,
        }
    }
}

impl SessionConfig {
    pub fn for_corpus(corpus: &Corpus) -> Self {
        Self {
            label_set: corpus.label_set().to_vec(),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.label_set.len() < 2 {
            return Err(Error::InvalidConfig("label set needs at least two labels".into()));
        }
        let distinct: BTreeSet<&String> = self.label_set.iter().collect();
        if distinct.len() != self.label_set.len() {
            return Err(Error::InvalidConfig("label set contains duplicates".into()));
        }
        if self.n_seed == 0 {
            return Err(Error::InvalidConfig("n_seed must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if let Some(t) = self.stop_f1_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidConfig("stop_f1_threshold must lie in (0, 1]".into()));
            }
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingSeedLabels,
    AwaitingBatchLabels,
    Training,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::AwaitingSeedLabels => "awaiting_seed_labels",
            Phase::AwaitingBatchLabels => "awaiting_batch_labels",
            Phase::Training => "training",
            Phase::Done => "done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxRounds,
    PoolExhausted,
    F1Threshold,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxRounds => "max_rounds",
            StopReason::PoolExhausted => "pool_exhausted",
            StopReason::F1Threshold => "f1_threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub label: String,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub n_labeled: usize,
    /// Test-set scores; absent when the test split has no gold labels.
    pub macro_f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub per_class_f1: BTreeMap<String, f64>,
    pub confusion: Option<Vec<Vec<u64>>>,
    /// The batch whose labels completed this round.
    pub queried_ids: Vec<String>,
    /// Share of `queried_ids` labeled with the minority class.
    pub minority_fraction: Option<f64>,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config: SessionConfig,
    pub corpus_fingerprint: String,
    pub phase: Phase,
    pub round: u32,
    pub labeled_ids: Vec<String>,
    pub unlabeled_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub pending_batch: Vec<String>,
    /// Labels received so far for `pending_batch`.
    pub pending_labels: BTreeMap<String, String>,
    pub assignments: BTreeMap<String, Assignment>,
    pub minority_label: Option<String>,
    pub current_head: Option<LinearHead>,
    pub history: Vec<RoundRecord>,
    pub stop_reason: Option<StopReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub round: u32,
    pub items: Vec<BatchItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub phase: Phase,
    pub completed: Option<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct Session {
    corpus: Arc<Corpus>,
    state: SessionState,
}

/// Smallest positive count wins, lowest label index on ties.
fn minority_of<'a>(labels: &[String], observed: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in observed {
        *counts.entry(l).or_default() += 1;
    }
    labels
        .iter()
        .filter_map(|l| counts.get(l.as_str()).map(|&c| (c, l)))
        .min_by_key(|&(c, _)| c)
        .map(|(_, l)| l.clone())
}

impl Session {
    pub fn create(corpus: Arc<Corpus>, mut config: SessionConfig) -> Result<Session> {
        if config.label_set.is_empty() {
            config.label_set = corpus.label_set().to_vec();
        }
        config.validate()?;
        if let Some(missing) = corpus.label_set().iter().find(|l| !config.label_set.contains(l)) {
            return Err(Error::InvalidConfig(format!(
                "corpus gold label {missing:?} is not in the session label set"
            )));
        }
        if let Some(doc) = corpus.missing_embeddings().next() {
            return Err(Error::MissingEmbedding(doc.id.clone()));
        }
        let (pool, test_ids) = split_pool_test(&corpus, config.test_fraction, config.rng_seed)?;
        if config.stop_f1_threshold.is_some() {
            if let Some(id) = test_ids.iter().find(|id| corpus.get(id).is_some_and(|d| d.gold_label.is_none())) {
                return Err(Error::MissingGoldLabel(id.clone()));
            }
        }
        let seed = select_seed(&pool, config.n_seed, &mut rng::stream(config.rng_seed, rng::STREAM_SEED))?;
        let seed_set: BTreeSet<&String> = seed.iter().collect();
        let unlabeled_ids = pool.iter().filter(|id| !seed_set.contains(id)).cloned().collect();
        let minority_label = minority_of(
            &config.label_set,
            corpus.documents().iter().filter_map(|d| d.gold_label.as_deref()),
        );
        let state = SessionState {
            corpus_fingerprint: corpus.fingerprint().to_owned(),
            config,
            phase: Phase::AwaitingSeedLabels,
            round: 0,
            labeled_ids: Vec::new(),
            unlabeled_ids,
            test_ids,
            pending_batch: seed,
            pending_labels: BTreeMap::new(),
            assignments: BTreeMap::new(),
            minority_label,
            current_head: None,
            history: Vec::new(),
            stop_reason: None,
        };
        Ok(Session { corpus, state })
    }

    pub(crate) fn from_parts(corpus: Arc<Corpus>, state: SessionState) -> Result<Session> {
        if state.corpus_fingerprint != corpus.fingerprint() {
            return Err(Error::Corrupted("session belongs to a different corpus".into()));
        }
        let session = Session { corpus, state };
        session.check_invariants()?;
        Ok(session)
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.state.config
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.state.history
    }

    pub fn label_set(&self) -> &[String] {
        &self.state.config.label_set
    }

    /// Number of documents in the annotation pool.
    pub fn pool_size(&self) -> usize {
        self.state.labeled_ids.len() + self.state.unlabeled_ids.len() + self.state.pending_batch.len()
    }

    pub fn assignment(&self, id: &str) -> Option<&Assignment> {
        self.state.assignments.get(id)
    }

    /// The batch awaiting labels. Calling it again without submitting labels
    /// returns the same batch.
    pub fn next_batch(&self) -> Result<Batch> {
        match self.state.phase {
            Phase::AwaitingSeedLabels | Phase::AwaitingBatchLabels => {}
            other => return Err(Error::WrongPhase(other.name())),
        }
        let items = self
            .state
            .pending_batch
            .iter()
            .map(|id| BatchItem {
                id: id.clone(),
                text: self.corpus.get(id).map(|d| d.text.clone()).unwrap_or_default(),
            })
            .collect();
        Ok(Batch {
            round: self.state.round,
            items,
        })
    }

    /// Records labels for pending documents. Partial submissions accumulate;
    /// the submission that labels the last pending document completes the
    /// round. On error the session is left unchanged.
    pub fn submit_labels(&mut self, labels: &BTreeMap<String, String>) -> Result<SubmitOutcome> {
        let mut next = self.state.clone();
        let completed = apply_labels(&self.corpus, &mut next, labels)?;
        self.state = next;
        Ok(SubmitOutcome {
            phase: self.state.phase,
            completed,
        })
    }

    pub fn should_stop(&self) -> Option<StopReason> {
        should_stop(&self.state)
    }

    /// Verifies the partition: labeled, unlabeled and pending are disjoint and
    /// together with the test ids reproduce the seeded split exactly.
    pub fn check_invariants(&self) -> Result<()> {
        let s = &self.state;
        let bad = |m: String| Err(Error::Corrupted(m));
        let (pool, test) = split_pool_test(&self.corpus, s.config.test_fraction, s.config.rng_seed)?;
        if test != s.test_ids {
            return bad("test ids differ from the seeded split".into());
        }
        let mut seen = BTreeSet::new();
        for id in s.labeled_ids.iter().chain(&s.unlabeled_ids).chain(&s.pending_batch) {
            if !seen.insert(id) {
                return bad(format!("id {id} appears twice in the pool partition"));
            }
        }
        let pool_set: BTreeSet<&String> = pool.iter().collect();
        if seen != pool_set {
            return bad("pool partition does not cover the pool".into());
        }
        if s.assignments.len() != s.labeled_ids.len()
            || s.labeled_ids.iter().any(|id| !s.assignments.contains_key(id))
        {
            return bad("assignments do not match labeled ids".into());
        }
        if s.pending_labels.keys().any(|id| !s.pending_batch.contains(id)) {
            return bad("pending label for a document outside the batch".into());
        }
        let labels = &s.config.label_set;
        if s.assignments.values().map(|a| &a.label).chain(s.pending_labels.values()).any(|l| !labels.contains(l)) {
            return bad("label outside the label set".into());
        }
        let awaiting = matches!(s.phase, Phase::AwaitingSeedLabels | Phase::AwaitingBatchLabels);
        if awaiting == s.pending_batch.is_empty() {
            return bad(format!("phase {} inconsistent with pending batch", s.phase.name()));
        }
        if s.phase == Phase::Training {
            return bad("session persisted mid-training".into());
        }
        if s.history.windows(2).any(|w| w[1].n_labeled <= w[0].n_labeled) {
            return bad("n_labeled not increasing across history".into());
        }
        if s.history.last().is_some_and(|r| r.n_labeled != s.labeled_ids.len()) {
            return bad("history disagrees with labeled count".into());
        }
        Ok(())
    }
}

fn should_stop(state: &SessionState) -> Option<StopReason> {
    let last = state.history.last()?;
    if last.round >= state.config.max_rounds {
        return Some(StopReason::MaxRounds);
    }
    if state.unlabeled_ids.is_empty() {
        return Some(StopReason::PoolExhausted);
    }
    match (state.config.stop_f1_threshold, last.macro_f1) {
        (Some(t), Some(f1)) if f1 >= t => Some(StopReason::F1Threshold),
        _ => None,
    }
}

fn apply_labels(
    corpus: &Corpus,
    state: &mut SessionState,
    labels: &BTreeMap<String, String>,
) -> Result<Option<RoundRecord>> {
    match state.phase {
        Phase::AwaitingSeedLabels | Phase::AwaitingBatchLabels => {}
        other => return Err(Error::WrongPhase(other.name())),
    }
    for (id, label) in labels {
        if corpus.get(id).is_none() {
            return Err(Error::UnknownId(id.clone()));
        }
        if state.assignments.contains_key(id) || state.pending_labels.contains_key(id) {
            return Err(Error::AlreadyLabeled(id.clone()));
        }
        if !state.pending_batch.contains(id) {
            return Err(Error::NotPending(id.clone()));
        }
        if !state.config.label_set.contains(label) {
            return Err(Error::UnknownLabel(label.clone()));
        }
    }
    state.pending_labels.extend(labels.iter().map(|(k, v)| (k.clone(), v.clone())));
    if state.pending_labels.len() < state.pending_batch.len() {
        return Ok(None);
    }
    complete_round(corpus, state).map(Some)
}

fn embedding_of<'a>(corpus: &'a Corpus, id: &str) -> Result<&'a [f64]> {
    corpus
        .get(id)
        .ok_or_else(|| Error::UnknownId(id.to_owned()))?
        .embedding
        .as_deref()
        .ok_or_else(|| Error::MissingEmbedding(id.to_owned()))
}

fn complete_round(corpus: &Corpus, state: &mut SessionState) -> Result<RoundRecord> {
    let started = Instant::now();
    state.phase = Phase::Training;
    let batch = std::mem::take(&mut state.pending_batch);
    let mut batch_labels = std::mem::take(&mut state.pending_labels);
    let round = state.round;
    for id in &batch {
        let label = batch_labels.remove(id).expect("every pending id is labeled");
        state.assignments.insert(id.clone(), Assignment { label, round });
        state.labeled_ids.push(id.clone());
    }

    let labels = &state.config.label_set;
    let class_of = |l: &str| labels.iter().position(|x| x == l).expect("validated label");
    let dim = corpus.dim().ok_or(Error::Empty("embeddings"))?;
    let x = Matrix::from_rows(
        dim,
        state
            .labeled_ids
            .iter()
            .map(|id| embedding_of(corpus, id))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let y: Vec<usize> = state
        .labeled_ids
        .iter()
        .map(|id| class_of(&state.assignments[id].label))
        .collect();
    let head = train_head(&x, &y, labels, &state.config.train)?.head;

    let metrics = evaluate_on_test(corpus, &state.test_ids, &head)?;

    if state.minority_label.is_none() {
        state.minority_label = minority_of(labels, state.assignments.values().map(|a| a.label.as_str()));
    }
    let minority_fraction = state.minority_label.as_ref().map(|m| {
        let hits = batch.iter().filter(|id| &state.assignments[*id].label == m).count();
        hits as f64 / batch.len() as f64
    });

    let record = RoundRecord {
        round,
        n_labeled: state.labeled_ids.len(),
        macro_f1: metrics.as_ref().map(|m| m.macro_f1),
        accuracy: metrics.as_ref().map(|m| m.accuracy),
        per_class_f1: metrics
            .as_ref()
            .map(|m| m.per_class.iter().map(|c| (c.label.clone(), c.f1)).collect())
            .unwrap_or_default(),
        confusion: metrics.map(|m| m.confusion),
        queried_ids: batch,
        minority_fraction,
        wall_time_ms: 0,
    };
    state.history.push(record);
    state.current_head = Some(head);

    if let Some(reason) = should_stop(state) {
        state.stop_reason = Some(reason);
        state.phase = Phase::Done;
    } else {
        let head = state.current_head.as_ref().expect("just trained");
        let docs: Vec<&Document> = state
            .unlabeled_ids
            .iter()
            .map(|id| corpus.get(id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect::<Result<_>>()?;
        let scores = score_documents(head, &docs)?;
        let next_round = round + 1;
        let mut query_rng = rng::stream(state.config.rng_seed, rng::STREAM_QUERY_BASE + u64::from(next_round));
        let picked = select_query_batch(&scores, state.config.batch_size, state.config.strategy, &mut query_rng)?;
        let picked_set: BTreeSet<&String> = picked.iter().collect();
        state.unlabeled_ids.retain(|id| !picked_set.contains(id));
        state.pending_batch = picked;
        state.round = next_round;
        state.phase = Phase::AwaitingBatchLabels;
    }
    let record = state.history.last_mut().expect("just pushed");
    record.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(record.clone())
}

/// Metrics on the test ids, or `None` when any of them lacks a gold label.
fn evaluate_on_test(corpus: &Corpus, test_ids: &[String], head: &LinearHead) -> Result<Option<Metrics>> {
    let mut rows = Vec::with_capacity(test_ids.len());
    let mut gold = Vec::with_capacity(test_ids.len());
    for id in test_ids {
        let doc = corpus.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        let Some(label) = doc.gold_label.as_deref() else {
            return Ok(None);
        };
        let Some(class) = head.label_order.iter().position(|l| l == label) else {
            return Ok(None);
        };
        rows.push(embedding_of(corpus, id)?);
        gold.push(class);
    }
    if gold.is_empty() {
        return Ok(None);
    }
    let x = Matrix::from_rows(head.dim(), rows)?;
    evaluate(head, &x, &gold).map(Some)
}
