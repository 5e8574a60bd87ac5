//! Python bindings.
//!
//! Structured values (configs, round records, batches, metrics) cross the
//! boundary as plain dicts and lists, using the same JSON shapes as the HTTP
//! API and the session file.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use activelabel_core::classifier::{self, predict_logits, train_head, Matrix, TrainConfig};
use activelabel_core::corpus::{corpus_stats, ingest_corpus};
use activelabel_core::session::{self as core_session, export_history, full_pool_reference, load_session, save_session};
use activelabel_core::strategies::{self, QueryStrategy, ScoreRecord};
use activelabel_core::synthetic::{self, SyntheticConfig, CALIBRATED_SEPARATION};
use activelabel_core::{embed, rng, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Serializes through JSON so Python sees the documented wire shapes.
fn to_py<T: Serialize + ?Sized>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned + Default>(py: Python<'_>, value: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let Some(value) = value else { return Ok(T::default()) };
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(cols, rows.iter().map(Vec::as_slice)).map_err(err)
}

fn strategy(name: &str) -> PyResult<QueryStrategy> {
    name.parse().map_err(|e: Error| PyValueError::new_err(e.to_string()))
}

/// Signed feature-hashing embedding, L2-normalized.
#[pyfunction]
#[pyo3(signature = (text, dim, salt = 0))]
fn hash_embed(text: &str, dim: usize, salt: u64) -> Vec<f64> {
    embed::hash_embed(text, dim, salt)
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> Vec<f64> {
    classifier::softmax(&logits)
}

#[pyclass(module = "activelabel_py", frozen)]
struct Corpus {
    inner: Arc<activelabel_core::Corpus>,
}

#[pymethods]
impl Corpus {
    /// Parses JSONL text: one `{"id", "text", "embedding"?, "gold_label"?}` per line.
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let inner = ingest_corpus(BufReader::new(text.as_bytes())).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let inner = ingest_corpus(BufReader::new(file)).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Seeded Gaussian-blob corpus with the default 10/29/61 class mix.
    #[staticmethod]
    #[pyo3(signature = (n_docs = 2458, dim = 16, separation = CALIBRATED_SEPARATION, seed = 0))]
    fn synthetic(n_docs: usize, dim: usize, separation: f64, seed: u64) -> PyResult<Self> {
        let config = SyntheticConfig { n_docs, dim, separation, seed, ..SyntheticConfig::default() };
        Ok(Self { inner: Arc::new(synthetic::generate(&config).map_err(err)?) })
    }

    /// Copy with hash embeddings filled in for documents that lack one.
    #[pyo3(signature = (dim, salt = 0))]
    fn with_hash_embeddings(&self, dim: usize, salt: u64) -> PyResult<Self> {
        let inner = (*self.inner).clone().with_hash_embeddings(dim, salt).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.documents().iter().map(|d| d.id.clone()).collect()
    }

    #[getter]
    fn label_set(&self) -> Vec<String> {
        self.inner.label_set().to_vec()
    }

    #[getter]
    fn dim(&self) -> Option<usize> {
        self.inner.dim()
    }

    #[getter]
    fn fingerprint(&self) -> &str {
        self.inner.fingerprint()
    }

    fn embedding(&self, id: &str) -> Option<Vec<f64>> {
        self.inner.get(id).and_then(|d| d.embedding.clone())
    }

    fn gold_label(&self, id: &str) -> Option<String> {
        self.inner.get(id).and_then(|d| d.gold_label.clone())
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &corpus_stats(&self.inner))
    }

    fn to_jsonl(&self) -> String {
        String::from_utf8(self.inner.to_jsonl()).expect("JSON is UTF-8")
    }

    fn __repr__(&self) -> String {
        format!("Corpus(n_docs={}, dim={:?})", self.inner.len(), self.inner.dim())
    }
}

#[pyclass(module = "activelabel_py", frozen)]
struct LinearHead {
    inner: classifier::LinearHead,
}

#[pymethods]
impl LinearHead {
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.label_order.clone()
    }

    /// Row-major weights, one row per class.
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights.iter_rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn bias(&self) -> Vec<f64> {
        self.inner.bias.clone()
    }

    fn logits(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let z = predict_logits(&self.inner, &matrix(x)?).map_err(err)?;
        Ok(z.iter_rows().map(<[f64]>::to_vec).collect())
    }

    /// Predicted class indices into `labels`.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let z = predict_logits(&self.inner, &matrix(x)?).map_err(err)?;
        Ok(z.iter_rows().map(classifier::argmax).collect())
    }
}

/// Full-batch gradient descent on a softmax-regression head. Returns the
/// head and the per-epoch loss trace.
#[pyfunction]
#[pyo3(signature = (x, y, labels, config = None))]
fn train(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    labels: Vec<String>,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<(LinearHead, Vec<f64>)> {
    let config: TrainConfig = from_py(py, config)?;
    let x = matrix(x)?;
    let report = py.detach(|| train_head(&x, &y, &labels, &config)).map_err(err)?;
    Ok((LinearHead { inner: report.head }, report.losses))
}

/// Margin, least-confidence and entropy of one logit vector.
#[pyfunction]
fn score(py: Python<'_>, logits: Vec<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &ScoreRecord::from_logits("", logits))
}

/// Picks `k` ids from `{id: logits}`. Ties break on ascending id.
#[pyfunction]
#[pyo3(signature = (logits, k, strategy = "margin", seed = 0))]
fn select_query_batch(logits: BTreeMap<String, Vec<f64>>, k: usize, strategy: &str, seed: u64) -> PyResult<Vec<String>> {
    let strategy = self::strategy(strategy)?;
    let scores: Vec<ScoreRecord> = logits.into_iter().map(|(id, z)| ScoreRecord::from_logits(id, z)).collect();
    strategies::select_query_batch(&scores, k, strategy, &mut rng::stream(seed, rng::STREAM_QUERY_BASE)).map_err(err)
}

#[pyclass(module = "activelabel_py")]
struct Session {
    inner: core_session::Session,
}

#[pymethods]
impl Session {
    /// `config` takes the session config fields (`n_seed`, `batch_size`,
    /// `max_rounds`, `strategy`, `rng_seed`, ...); missing ones use defaults.
    #[new]
    #[pyo3(signature = (corpus, config = None))]
    fn new(py: Python<'_>, corpus: &Corpus, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let config: core_session::SessionConfig = from_py(py, config)?;
        let inner = core_session::Session::create(corpus.inner.clone(), config).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str, corpus: &Corpus) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let inner = load_session(BufReader::new(file), corpus.inner.clone()).map_err(err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let mut bytes = Vec::new();
        save_session(&self.inner, &mut bytes).map_err(err)?;
        std::fs::write(path, bytes).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
    }

    #[getter]
    fn phase(&self) -> &'static str {
        self.inner.phase().name()
    }

    #[getter]
    fn round(&self) -> u32 {
        self.inner.state().round
    }

    #[getter]
    fn n_labeled(&self) -> usize {
        self.inner.state().labeled_ids.len()
    }

    #[getter]
    fn pool_size(&self) -> usize {
        self.inner.pool_size()
    }

    #[getter]
    fn label_set(&self) -> Vec<String> {
        self.inner.label_set().to_vec()
    }

    #[getter]
    fn stop_reason(&self) -> Option<String> {
        self.inner.state().stop_reason.map(|r| r.to_string())
    }

    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.config())
    }

    /// `{"round": r, "items": [{"id", "text"}, ...]}`; repeated calls return
    /// the same batch until it is fully labeled.
    fn next_batch(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.next_batch().map_err(err)?)
    }

    /// Applies `{id: label}` atomically. Returns the phase and, when this
    /// completed the batch, the new round record.
    fn submit_labels(&mut self, py: Python<'_>, labels: BTreeMap<String, String>) -> PyResult<Py<PyAny>> {
        let outcome = py.detach(|| self.inner.submit_labels(&labels)).map_err(err)?;
        to_py(py, &outcome)
    }

    fn history(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.history())
    }

    fn export_csv(&self) -> PyResult<String> {
        let bytes = export_history(self.inner.history(), self.inner.label_set()).map_err(err)?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_invariants().map_err(err)
    }
}

/// Runs a session to completion with gold labels as the annotator and
/// returns its round records.
#[pyfunction]
#[pyo3(signature = (corpus, config = None))]
fn run_simulation(py: Python<'_>, corpus: &Corpus, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let config: core_session::SessionConfig = from_py(py, config)?;
    let corpus = corpus.inner.clone();
    let history = py.detach(|| core_session::run_simulation(corpus, config)).map_err(err)?;
    to_py(py, &history)
}

/// Test metrics of a head trained on the whole pool under `config`'s split.
#[pyfunction]
#[pyo3(signature = (corpus, config = None))]
fn full_pool_metrics(py: Python<'_>, corpus: &Corpus, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let config: core_session::SessionConfig = from_py(py, config)?;
    let config = core_session::SessionConfig { label_set: config.label_set.clone(), ..config };
    let metrics = py.detach(|| full_pool_reference(&corpus.inner, &config)).map_err(err)?;
    to_py(py, &metrics)
}

#[pymodule]
fn activelabel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<LinearHead>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(select_query_batch, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(full_pool_metrics, m)?)?;
    m.add("CALIBRATED_SEPARATION", CALIBRATED_SEPARATION)?;
    Ok(())
}
