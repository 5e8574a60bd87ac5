//! `activelabel` command line.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, bad corpus, bad
//! config), 2 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use activelabel_core::corpus::{corpus_stats, ingest_corpus, ClassDistribution};
use activelabel_core::session::{export_history, full_pool_reference, labels_to_reach, run_simulation, SessionConfig};
use activelabel_core::synthetic::{generate, SyntheticConfig, CALIBRATED_SEPARATION};
use activelabel_core::{Corpus, QueryStrategy, RoundRecord};

use crate::backend::BackendClient;
use crate::config::ServiceConfig;
use crate::embedding::{resolve_embeddings, EmbedError, EmbedSource};

#[derive(Debug, Parser)]
#[command(name = "activelabel", version, about = "Active-learning document annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a JSONL corpus, optionally embedding documents that lack vectors
    Ingest {
        corpus: PathBuf,
        /// hash:<dim> or backend:<url>
        #[arg(long)]
        embed: Option<EmbedSource>,
        /// Write the (embedded) corpus here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay gold labels through an annotation session and write the learning curve
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "margin")]
        strategy: QueryStrategy,
        /// Stop once the test macro-F1 reaches this value
        #[arg(long)]
        stop_f1: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run margin and random sampling with identical seeds and compare label budgets
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Absolute macro-F1 target; defaults to the full-pool score minus --target-gap
        #[arg(long)]
        target_f1: Option<f64>,
        #[arg(long, default_value_t = 0.02)]
        target_gap: f64,
        /// Output directory for margin.csv, random.csv and summary.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a seeded Gaussian-blob corpus
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2458)]
        n_docs: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = CALIBRATED_SEPARATION)]
        separation: f64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 160)]
    seed_size: usize,
    #[arg(long, default_value_t = 40)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    rounds: u32,
    #[arg(long, default_value_t = 0)]
    rng: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// hash:<dim> or backend:<url> for documents without embeddings
    #[arg(long)]
    embed: Option<EmbedSource>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<activelabel_core::Error> for CliError {
    fn from(e: activelabel_core::Error) -> Self {
        match e {
            activelabel_core::Error::Io(m) => CliError::Io(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Corpus(e) => e.into(),
            EmbedError::Backend(e) => CliError::Io(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))
}

fn load_corpus(path: &Path, embed: Option<&EmbedSource>) -> Result<Corpus, CliError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let corpus = ingest_corpus(BufReader::new(file)).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    match embed {
        None => Ok(corpus),
        Some(EmbedSource::Hash(dim)) => Ok(runtime()?.block_on(resolve_embeddings(corpus, Some(*dim), None))?),
        Some(EmbedSource::Backend(url)) => {
            let client = BackendClient::new(url.clone(), std::time::Duration::from_secs(60))
                .map_err(|e| CliError::Io(e.to_string()))?;
            Ok(runtime()?.block_on(resolve_embeddings(corpus, None, Some(&client)))?)
        }
    }
}

impl RunArgs {
    fn session_config(&self, corpus: &Corpus, strategy: QueryStrategy) -> SessionConfig {
        SessionConfig {
            test_fraction: self.test_fraction,
            n_seed: self.seed_size,
            batch_size: self.batch,
            max_rounds: self.rounds,
            strategy,
            rng_seed: self.rng,
            ..SessionConfig::for_corpus(corpus)
        }
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    n_docs: usize,
    dim: Option<usize>,
    n_missing_embeddings: usize,
    classes: ClassDistribution,
}

#[derive(Debug, Serialize)]
pub struct LearnerSummary {
    pub strategy: QueryStrategy,
    pub labels_to_target: Option<usize>,
    pub final_n_labeled: usize,
    pub final_macro_f1: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub rng_seed: u64,
    pub full_pool_macro_f1: f64,
    pub target_macro_f1: f64,
    pub learners: Vec<LearnerSummary>,
    /// Margin labels-to-target over random labels-to-target, when both reach it.
    pub label_ratio: Option<f64>,
}

fn learner(strategy: QueryStrategy, history: &[RoundRecord], target: f64) -> LearnerSummary {
    let last = history.last();
    LearnerSummary {
        strategy,
        labels_to_target: labels_to_reach(history, target),
        final_n_labeled: last.map_or(0, |r| r.n_labeled),
        final_macro_f1: last.and_then(|r| r.macro_f1),
    }
}

fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { corpus, embed, out } => {
            let corpus = load_corpus(&corpus, embed.as_ref())?;
            if let Some(out) = out {
                write_file(&out, &corpus.to_jsonl())?;
            }
            let summary = IngestSummary {
                n_docs: corpus.len(),
                dim: corpus.dim(),
                n_missing_embeddings: corpus.missing_embeddings().count(),
                classes: corpus_stats(&corpus),
            };
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Simulate { run, strategy, stop_f1, out } => {
            let corpus = Arc::new(load_corpus(&run.corpus, run.embed.as_ref())?);
            let config = SessionConfig {
                stop_f1_threshold: stop_f1,
                ..run.session_config(&corpus, strategy)
            };
            let labels = config.label_set.clone();
            let history = run_simulation(corpus, config)?;
            write_file(&out, &export_history(&history, &labels)?)?;
            let last = history.last().expect("a simulation records at least one round");
            println!(
                "{strategy}: {} rounds, {} labels, final macro-F1 {}",
                history.len(),
                last.n_labeled,
                last.macro_f1.map_or("n/a".into(), |f| format!("{f:.4}"))
            );
        }
        Command::Compare { run, target_f1, target_gap, out } => {
            let corpus = Arc::new(load_corpus(&run.corpus, run.embed.as_ref())?);
            fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let margin_cfg = run.session_config(&corpus, QueryStrategy::Margin);
            let labels = margin_cfg.label_set.clone();
            let reference = full_pool_reference(&corpus, &margin_cfg)?.macro_f1;
            let target = target_f1.unwrap_or(reference - target_gap);
            let mut learners = Vec::new();
            for strategy in [QueryStrategy::Margin, QueryStrategy::Random] {
                let config = SessionConfig { strategy, ..margin_cfg.clone() };
                let history = run_simulation(corpus.clone(), config)?;
                write_file(&out.join(format!("{}.csv", strategy.name())), &export_history(&history, &labels)?)?;
                learners.push(learner(strategy, &history, target));
            }
            let label_ratio = match (learners[0].labels_to_target, learners[1].labels_to_target) {
                (Some(m), Some(r)) => Some(m as f64 / r as f64),
                _ => None,
            };
            let summary = CompareSummary {
                rng_seed: run.rng,
                full_pool_macro_f1: reference,
                target_macro_f1: target,
                learners,
                label_ratio,
            };
            let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
            json.push(b'\n');
            write_file(&out.join("summary.json"), &json)?;
            for l in &summary.learners {
                println!(
                    "{}: labels to reach macro-F1 {:.4}: {}",
                    l.strategy,
                    target,
                    l.labels_to_target.map_or("not reached".into(), |n| n.to_string())
                );
            }
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config).map_err(|e| match e {
                crate::config::ConfigError::Read { .. } => CliError::Io(e.to_string()),
                other => CliError::Validation(other.to_string()),
            })?;
            runtime()?
                .block_on(crate::api::serve(config))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        Command::Synth { out, seed, n_docs, dim, separation } => {
            let corpus = generate(&SyntheticConfig {
                n_docs,
                dim,
                separation,
                seed,
                ..SyntheticConfig::default()
            })?;
            write_file(&out, &corpus.to_jsonl())?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
