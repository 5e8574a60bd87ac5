//! Softmax-regression head over frozen document embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equal-length rows. An empty iterator gives a `0 x cols` matrix.
    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// K x D weights plus bias; row `i` scores `label_order[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub label_order: Vec<String>,
}

impl LinearHead {
    pub fn zeros(label_order: Vec<String>, dim: usize) -> Result<Self> {
        if label_order.len() < 2 {
            return Err(Error::InvalidConfig("a head needs at least two classes".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        Ok(Self {
            weights: Matrix::zeros(label_order.len(), dim),
            bias: vec![0.0; label_order.len()],
            label_order,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Logits for a single embedding.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the relative loss decrease of an epoch falls below this.
    pub loss_tolerance: f64,
    pub l2_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_epochs: 500,
            loss_tolerance: 1e-7,
            l2_lambda: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be positive".into()));
        }
        if !(self.loss_tolerance > 0.0 && self.loss_tolerance.is_finite()) {
            return Err(Error::InvalidConfig("loss_tolerance must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::InvalidConfig("l2_lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Shift-stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_weights: Matrix,
    pub grad_bias: Vec<f64>,
}

fn check_inputs(head: &LinearHead, x: &Matrix, y: &[usize]) -> Result<()> {
    if x.cols() != head.dim() {
        return Err(Error::DimensionMismatch {
            expected: head.dim(),
            got: x.cols(),
        });
    }
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= head.n_classes()) {
        return Err(Error::LabelOutOfRange {
            index: bad,
            classes: head.n_classes(),
        });
    }
    Ok(())
}

/// Mean cross-entropy plus `l2_lambda / 2 * ||W||_F^2` (bias unregularized),
/// with its exact gradient.
pub fn loss_and_grad(head: &LinearHead, x: &Matrix, y: &[usize], l2_lambda: f64) -> Result<LossGrad> {
    if y.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_inputs(head, x, y)?;
    let k = head.n_classes();
    let d = head.dim();
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut gw = Matrix::zeros(k, d);
    let mut gb = vec![0.0; k];
    for (xi, &yi) in x.iter_rows().zip(y) {
        let z = head.logits(xi);
        loss += log_sum_exp(&z) - z[yi];
        let p = softmax(&z);
        for c in 0..k {
            let r = (p[c] - if c == yi { 1.0 } else { 0.0 }) / n;
            gb[c] += r;
            for (g, xv) in gw.row_mut(c).iter_mut().zip(xi) {
                *g += r * xv;
            }
        }
    }
    loss /= n;
    let w = head.weights.as_slice();
    loss += 0.5 * l2_lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (g, wv) in gw.as_mut_slice().iter_mut().zip(w) {
        *g += l2_lambda * wv;
    }
    Ok(LossGrad {
        loss,
        grad_weights: gw,
        grad_bias: gb,
    })
}

/// Outcome of [`train_head`]; `losses[0]` is the zero-initialization loss and
/// each later entry is the loss after an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub head: LinearHead,
    pub losses: Vec<f64>,
    pub epochs: usize,
}

const MAX_HALVINGS: usize = 30;

/// Full-batch gradient descent from zero initialization. A step that raises
/// the loss is halved (at most 30 times) and the learning rate is restored
/// at the start of the next epoch.
pub fn train_head(x: &Matrix, y: &[usize], label_order: &[String], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if y.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut head = LinearHead::zeros(label_order.to_vec(), x.cols())?;
    let mut current = loss_and_grad(&head, x, y, config.l2_lambda)?;
    if !current.loss.is_finite() {
        return Err(Error::Diverged);
    }
    let mut losses = vec![current.loss];
    let mut epochs = 0;
    while epochs < config.max_epochs {
        epochs += 1;
        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut candidate = head.clone();
            for (w, g) in candidate
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(current.grad_weights.as_slice())
            {
                *w -= step * g;
            }
            for (b, g) in candidate.bias.iter_mut().zip(&current.grad_bias) {
                *b -= step * g;
            }
            let next = loss_and_grad(&candidate, x, y, config.l2_lambda)?;
            if next.loss.is_finite() && next.loss <= current.loss {
                accepted = Some((candidate, next));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            break;
        };
        let decrease = current.loss - next.loss;
        let scale = current.loss.abs().max(f64::MIN_POSITIVE);
        head = candidate;
        current = next;
        losses.push(current.loss);
        if decrease / scale < config.loss_tolerance {
            break;
        }
    }
    Ok(TrainReport { head, losses, epochs })
}

/// N x K logits.
pub fn predict_logits(head: &LinearHead, x: &Matrix) -> Result<Matrix> {
    if x.cols() != head.dim() && x.rows() > 0 {
        return Err(Error::DimensionMismatch {
            expected: head.dim(),
            got: x.cols(),
        });
    }
    let mut out = Matrix::zeros(x.rows(), head.n_classes());
    for (i, xi) in x.iter_rows().enumerate() {
        out.row_mut(i).copy_from_slice(&head.logits(xi));
    }
    Ok(out)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
