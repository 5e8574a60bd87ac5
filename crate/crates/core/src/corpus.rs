//! Documents, JSONL ingestion, class statistics and the pool/test split.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::hash_embed;
use crate::error::{Error, Result};
use crate::rng;

/// One text unit. `embedding` is frozen once the corpus is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            embedding: None,
            gold_label: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_gold(mut self, label: impl Into<String>) -> Self {
        self.gold_label = Some(label.into());
        self
    }
}

/// An immutable, validated collection of documents in ingestion order.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    label_set: Vec<String>,
    dim: Option<usize>,
    index: HashMap<String, usize>,
    fingerprint: String,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.documents == other.documents
    }
}

/// Checks one document against the corpus-so-far. `line` is 1-based and only
/// used for error messages.
fn check_document(
    doc: &Document,
    line: usize,
    dim: &mut Option<usize>,
    index: &HashMap<String, usize>,
) -> Result<()> {
    if doc.id.is_empty() {
        return Err(Error::MalformedLine {
            line,
            message: "empty id".into(),
        });
    }
    if index.contains_key(&doc.id) {
        return Err(Error::DuplicateId {
            id: doc.id.clone(),
            line,
        });
    }
    if let Some(e) = &doc.embedding {
        if e.is_empty() {
            return Err(Error::MalformedLine {
                line,
                message: "empty embedding".into(),
            });
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEmbedding { line });
        }
        match *dim {
            None => *dim = Some(e.len()),
            Some(d) if d != e.len() => {
                return Err(Error::DimensionMismatchAt {
                    line,
                    expected: d,
                    got: e.len(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

impl Corpus {
    /// Validates `documents` and builds the corpus. Error line numbers are
    /// 1-based positions in `documents`.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut dim = None;
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            check_document(doc, i + 1, &mut dim, &index)?;
            index.insert(doc.id.clone(), i);
        }
        Ok(Self::assemble(documents, dim, index))
    }

    fn assemble(documents: Vec<Document>, dim: Option<usize>, index: HashMap<String, usize>) -> Self {
        let label_set: Vec<String> = documents
            .iter()
            .filter_map(|d| d.gold_label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut hasher = Sha256::new();
        for doc in &documents {
            hasher.update(serde_json::to_vec(doc).expect("document serializes"));
            hasher.update(b"\n");
        }
        let fingerprint = hex::encode(hasher.finalize());
        Self {
            documents,
            label_set,
            dim,
            index,
            fingerprint,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Sorted distinct gold labels.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    /// Embedding dimension, `None` when no document carries an embedding.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// SHA-256 over the canonical JSONL form of the documents.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn all_embedded(&self) -> bool {
        self.documents.iter().all(|d| d.embedding.is_some())
    }

    /// Documents without an embedding, in corpus order.
    pub fn missing_embeddings(&self) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(|d| d.embedding.is_none())
    }

    /// Assigns `vectors` to the documents lacking embeddings, in corpus order.
    pub fn fill_missing(self, vectors: Vec<Vec<f64>>) -> Result<Corpus> {
        let missing = self.missing_embeddings().count();
        if missing != vectors.len() {
            return Err(Error::NotEnoughItems {
                requested: missing,
                available: vectors.len(),
            });
        }
        let mut vectors = vectors.into_iter();
        let documents = self
            .documents
            .into_iter()
            .map(|mut d| {
                if d.embedding.is_none() {
                    d.embedding = vectors.next();
                }
                d
            })
            .collect();
        Corpus::new(documents)
    }

    /// Fills missing embeddings with [`hash_embed`].
    pub fn with_hash_embeddings(self, dim: usize, salt: u64) -> Result<Corpus> {
        if dim == 0 {
            return Err(Error::InvalidConfig("hash embedding dimension must be >= 1".into()));
        }
        let vectors = self
            .missing_embeddings()
            .map(|d| hash_embed(&d.text, dim, salt))
            .collect();
        self.fill_missing(vectors)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Reads one JSON object per line. Blank lines are skipped; unknown keys are
/// ignored.
pub fn ingest_corpus<R: BufRead>(source: R) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut dim = None;
    let mut index = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        check_document(&doc, line_no, &mut dim, &index)?;
        index.insert(doc.id.clone(), documents.len());
        documents.push(doc);
    }
    Ok(Corpus::assemble(documents, dim, index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

/// Gold-label counts per label. Documents without a gold label are not counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub total: usize,
    pub classes: Vec<ClassCount>,
}

impl ClassDistribution {
    pub fn fraction(&self, label: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.label == label).map(|c| c.fraction)
    }

    pub fn count(&self, label: &str) -> Option<usize> {
        self.classes.iter().find(|c| c.label == label).map(|c| c.count)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> ClassDistribution {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for label in corpus.documents().iter().filter_map(|d| d.gold_label.as_deref()) {
        *counts.entry(label).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let classes = corpus
        .label_set()
        .iter()
        .map(|label| {
            let count = counts.get(label.as_str()).copied().unwrap_or(0);
            ClassCount {
                label: label.clone(),
                count,
                fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
            }
        })
        .collect();
    ClassDistribution { total, classes }
}

/// Number of test documents: `n * test_fraction` rounded half away from zero.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (n as f64 * test_fraction).round() as usize
}

/// Seeded unstratified split. Both id lists come back in corpus order.
pub fn split_pool_test(corpus: &Corpus, test_fraction: f64, rng_seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = corpus.len();
    let n_test = test_size(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidSplit(format!(
            "{n} documents with test fraction {test_fraction} leave an empty pool or test set"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(rng_seed, rng::STREAM_SPLIT);
    rng::partial_shuffle(&mut order, n, &mut rng);
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut pool, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (doc, test_member) in corpus.documents().iter().zip(is_test) {
        if test_member {
            test.push(doc.id.clone());
        } else {
            pool.push(doc.id.clone());
        }
    }
    Ok((pool, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_of(n: usize) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| Document::new(format!("d{i}"), "").with_embedding(vec![i as f64]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ingest_preserves_order() {
        let src = br#"{"id":"a","text":"x"}
{"id":"b","text":"y","embedding":[1.0,2.0]}

{"id":"c","text":"z","gold_label":"L","extra":42}
"#;
        let c = ingest_corpus(&src[..]).unwrap();
        let ids: Vec<_> = c.documents().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(c.dim(), Some(2));
        assert_eq!(c.label_set(), ["L"]);
    }

    #[test]
    fn duplicate_id_reports_line() {
        let src = b"{\"id\":\"x\",\"text\":\"\"}\n{\"id\":\"x\",\"text\":\"\"}\n";
        let err = ingest_corpus(&src[..]).unwrap_err();
        assert_eq!(err.to_string(), "duplicate id x at line 2");
    }

    #[test]
    fn dimension_mismatch_and_malformed_lines() {
        let src = b"{\"id\":\"a\",\"embedding\":[1,2]}\n{\"id\":\"b\",\"embedding\":[1]}\n";
        assert_eq!(
            ingest_corpus(&src[..]).unwrap_err(),
            Error::DimensionMismatchAt { line: 2, expected: 2, got: 1 }
        );
        let src = b"{\"id\":\"a\"}\nnot json\n";
        assert!(matches!(
            ingest_corpus(&src[..]).unwrap_err(),
            Error::MalformedLine { line: 2, .. }
        ));
        let src = b"{\"id\":\"a\",\"embedding\":[]}\n";
        assert!(matches!(ingest_corpus(&src[..]).unwrap_err(), Error::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn non_finite_embedding_rejected() {
        let docs = vec![Document::new("a", "").with_embedding(vec![f64::NAN])];
        assert_eq!(Corpus::new(docs).unwrap_err(), Error::NonFiniteEmbedding { line: 1 });
        let src = b"{\"id\":\"a\",\"embedding\":[1e999]}\n";
        assert!(ingest_corpus(&src[..]).is_err());
    }

    #[test]
    fn stats_arithmetic() {
        let docs = ["A", "A", "B"]
            .iter()
            .enumerate()
            .map(|(i, l)| Document::new(format!("{i}"), "").with_gold(*l))
            .chain(std::iter::once(Document::new("u", "")))
            .collect();
        let stats = corpus_stats(&Corpus::new(docs).unwrap());
        assert_eq!(stats.total, 3);
        assert_eq!(stats.count("A"), Some(2));
        assert!((stats.fraction("A").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((stats.fraction("B").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stats_without_gold() {
        let stats = corpus_stats(&corpus_of(4));
        assert_eq!(stats.total, 0);
        assert!(stats.classes.iter().all(|c| c.fraction == 0.0));
    }

    #[test]
    fn split_sizes_follow_rounding_rule() {
        assert_eq!(test_size(2458, 0.2), 492);
        assert_eq!(test_size(5, 0.2), 1);
        assert_eq!(test_size(10, 0.25), 3);
        let (pool, test) = split_pool_test(&corpus_of(5), 0.2, 3).unwrap();
        assert_eq!((pool.len(), test.len()), (4, 1));
        let (pool, test) = split_pool_test(&corpus_of(2458), 0.2, 3).unwrap();
        assert_eq!((pool.len(), test.len()), (1966, 492));
    }

    #[test]
    fn split_is_deterministic() {
        let c = corpus_of(10);
        assert_eq!(split_pool_test(&c, 0.2, 11).unwrap(), split_pool_test(&c, 0.2, 11).unwrap());
        assert_ne!(split_pool_test(&c, 0.5, 11).unwrap(), split_pool_test(&c, 0.5, 12).unwrap());
    }

    #[test]
    fn split_errors() {
        let c = corpus_of(10);
        assert!(split_pool_test(&c, 0.0, 1).is_err());
        assert!(split_pool_test(&c, 1.0, 1).is_err());
        assert!(split_pool_test(&c, 0.01, 1).is_err());
        assert!(split_pool_test(&corpus_of(1), 0.5, 1).is_err());
    }

    #[test]
    fn fill_missing_with_hash() {
        let docs = vec![Document::new("a", "death penalty"), Document::new("b", "")];
        let c = Corpus::new(docs).unwrap().with_hash_embeddings(8, 0).unwrap();
        assert!(c.all_embedded());
        assert_eq!(c.dim(), Some(8));
        assert_eq!(c.get("b").unwrap().embedding.as_deref(), Some(&[0.0; 8][..]));
    }
}
