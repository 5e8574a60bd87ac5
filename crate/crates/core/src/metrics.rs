//! Confusion-matrix based evaluation (macro F1, accuracy, per-class scores).

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, predict_logits, LinearHead, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Scores derived from a square confusion matrix whose rows and columns
    /// follow `labels`. Zero denominators give 0.
    pub fn from_confusion(labels: &[String], confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = labels.len();
        if confusion.len() != k || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: confusion.len(),
            });
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        let per_class: Vec<ClassScores> = labels
            .iter()
            .enumerate()
            .map(|(c, label)| {
                let tp = confusion[c][c];
                let support: u64 = confusion[c].iter().sum();
                let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    label: label.clone(),
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
        Ok(Self {
            macro_f1,
            accuracy: ratio(correct, total),
            per_class,
            confusion,
        })
    }

    pub fn from_predictions(labels: &[String], gold: &[usize], predicted: &[usize]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: gold.len(),
                got: predicted.len(),
            });
        }
        let k = labels.len();
        let mut confusion = vec![vec![0u64; k]; k];
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= k || p >= k {
                return Err(Error::LabelOutOfRange {
                    index: g.max(p),
                    classes: k,
                });
            }
            confusion[g][p] += 1;
        }
        Self::from_confusion(labels, confusion)
    }

    pub fn f1_of(&self, label: &str) -> Option<f64> {
        self.per_class.iter().find(|c| c.label == label).map(|c| c.f1)
    }
}

/// Evaluates `head` on embeddings `x` with gold class indices `gold`.
/// Prediction is the argmax logit, lowest label index on ties.
pub fn evaluate(head: &LinearHead, x: &Matrix, gold: &[usize]) -> Result<Metrics> {
    if gold.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let logits = predict_logits(head, x)?;
    let predicted: Vec<usize> = logits.iter_rows().map(argmax).collect();
    Metrics::from_predictions(&head.label_order, gold, &predicted)
}
