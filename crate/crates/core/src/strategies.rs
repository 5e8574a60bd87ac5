//! Seed selection and per-round query selection.
//!
//! Uncertainty scores are computed once per round from the head trained at
//! the end of the previous round; the whole batch is chosen from that single
//! scoring pass. Ties always fall to the ascending document id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{softmax, LinearHead};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    /// Smallest gap between the two largest logits.
    #[default]
    Margin,
    /// Largest `1 - max p`.
    #[serde(alias = "leastconf")]
    LeastConfidence,
    /// Largest predictive entropy.
    Entropy,
    /// Uniform sample; the passive baseline.
    Random,
}

impl QueryStrategy {
    pub fn name(self) -> &'static str {
        match self {
            QueryStrategy::Margin => "margin",
            QueryStrategy::LeastConfidence => "leastconf",
            QueryStrategy::Entropy => "entropy",
            QueryStrategy::Random => "random",
        }
    }
}

impl fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "margin" => Ok(QueryStrategy::Margin),
            "leastconf" | "least_confidence" => Ok(QueryStrategy::LeastConfidence),
            "entropy" => Ok(QueryStrategy::Entropy),
            "random" => Ok(QueryStrategy::Random),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Top-1 minus top-2 raw logit.
    pub margin: f64,
    pub least_confidence: f64,
    /// Natural-log entropy of `probs`.
    pub entropy: f64,
}

impl ScoreRecord {
    pub fn from_logits(doc_id: impl Into<String>, logits: Vec<f64>) -> Self {
        let probs = softmax(&logits);
        let (mut top1, mut top2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &z in &logits {
            if z > top1 {
                top2 = top1;
                top1 = z;
            } else if z > top2 {
                top2 = z;
            }
        }
        let margin = if logits.len() < 2 { 0.0 } else { top1 - top2 };
        let max_p = probs.iter().copied().fold(0.0, f64::max);
        let entropy = -probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>();
        Self {
            doc_id: doc_id.into(),
            logits,
            probs,
            margin,
            least_confidence: 1.0 - max_p,
            entropy: entropy.max(0.0),
        }
    }
}

/// Uniform sample of `n_seed` ids without replacement, in selection order.
pub fn select_seed(pool_ids: &[String], n_seed: usize, rng: &mut SeededRng) -> Result<Vec<String>> {
    if n_seed > pool_ids.len() {
        return Err(Error::NotEnoughItems {
            requested: n_seed,
            available: pool_ids.len(),
        });
    }
    let mut ids = pool_ids.to_vec();
    rng::partial_shuffle(&mut ids, n_seed, rng);
    ids.truncate(n_seed);
    Ok(ids)
}

pub fn score_documents(head: &LinearHead, docs: &[&Document]) -> Result<Vec<ScoreRecord>> {
    docs.iter()
        .map(|doc| {
            let x = doc
                .embedding
                .as_deref()
                .ok_or_else(|| Error::MissingEmbedding(doc.id.clone()))?;
            if x.len() != head.dim() {
                return Err(Error::DimensionMismatch {
                    expected: head.dim(),
                    got: x.len(),
                });
            }
            Ok(ScoreRecord::from_logits(doc.id.clone(), head.logits(x)))
        })
        .collect()
}

/// Ordering used to rank candidates: most informative first, ids ascending
/// among equal scores.
pub fn rank_order(strategy: QueryStrategy, a: &ScoreRecord, b: &ScoreRecord) -> Ordering {
    let by_score = match strategy {
        QueryStrategy::Margin => a.margin.total_cmp(&b.margin),
        QueryStrategy::LeastConfidence => b.least_confidence.total_cmp(&a.least_confidence),
        QueryStrategy::Entropy => b.entropy.total_cmp(&a.entropy),
        QueryStrategy::Random => Ordering::Equal,
    };
    by_score.then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Picks up to `k` ids from `scores`. The whole list is returned when it
/// holds fewer than `k` records. Uncertainty strategies return ids in rank
/// order; `Random` returns its sample sorted by id.
pub fn select_query_batch(
    scores: &[ScoreRecord],
    k: usize,
    strategy: QueryStrategy,
    rng: &mut SeededRng,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let take = k.min(scores.len());
    let mut picked: Vec<&ScoreRecord> = scores.iter().collect();
    if strategy == QueryStrategy::Random {
        rng::partial_shuffle(&mut picked, take, rng);
        picked.truncate(take);
    } else if take < picked.len() {
        picked.select_nth_unstable_by(take - 1, |a, b| rank_order(strategy, a, b));
        picked.truncate(take);
    }
    picked.sort_by(|a, b| rank_order(strategy, a, b));
    Ok(picked.into_iter().map(|s| s.doc_id.clone()).collect())
}
