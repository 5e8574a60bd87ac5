//! Pool-based active learning for document annotation.
//!
//! A corpus of embedded documents is split into an annotation pool and a
//! held-out test set. A random seed batch is labeled first; every later round
//! trains a softmax-regression head on the labeled documents, scores the
//! remaining pool and queries the documents the head is least sure about.
//!
//! ```
//! use activelabel_core::synthetic::{SyntheticConfig, generate};
//! use activelabel_core::session::{SessionConfig, run_simulation};
//!
//! let corpus = generate(&SyntheticConfig { n_docs: 300, ..SyntheticConfig::default() }).unwrap();
//! let mut config = SessionConfig::for_corpus(&corpus);
//! config.n_seed = 30;
//! config.batch_size = 10;
//! config.max_rounds = 2;
//! let history = run_simulation(corpus.into(), config).unwrap();
//! assert_eq!(history.iter().map(|r| r.n_labeled).collect::<Vec<_>>(), vec![30, 40, 50]);
//! ```

pub mod classifier;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod session;
pub mod strategies;
pub mod synthetic;

pub use classifier::{LinearHead, Matrix, TrainConfig};
pub use corpus::{ClassDistribution, Corpus, Document};
pub use error::{Error, Result};
pub use metrics::Metrics;
pub use session::{RoundRecord, Session, SessionConfig, SessionState};
pub use strategies::{QueryStrategy, ScoreRecord};
