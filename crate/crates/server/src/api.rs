//! HTTP/JSON API over annotation sessions.
//!
//! Mutations on one session are serialized by its write lock; a submission is
//! applied to a copy, persisted, and only then swapped in, so a failed request
//! leaves both the stored and the in-memory session untouched.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::io::BufReader;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::RwLock;

use activelabel_core::corpus::ingest_corpus;
use activelabel_core::session::{export_history, Batch, Phase, SessionConfig};
use activelabel_core::{Corpus, Error as CoreError, RoundRecord, Session};

use crate::backend::BackendClient;
use crate::config::ServiceConfig;
use crate::embedding::{resolve_embeddings, EmbedError};
use crate::store::{Store, StoreError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} {id} not found"))
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::WrongPhase(_) => StatusCode::CONFLICT,
            CoreError::Io(_) | CoreError::Diverged => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<EmbedError> for ApiError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Corpus(e) => e.into(),
            EmbedError::Backend(e) => Self::new(StatusCode::BAD_GATEWAY, e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

pub struct AppState {
    store: Store,
    corpora: RwLock<HashMap<String, Arc<Corpus>>>,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
    hash_dim: Option<usize>,
    backend: Option<BackendClient>,
}

impl AppState {
    /// Opens the data directory and reloads stored corpora and sessions.
    pub fn open(config: &ServiceConfig) -> Result<Arc<Self>, StoreError> {
        let store = Store::open(&config.data_dir)?;
        let corpora = store.load_corpora();
        let sessions = store
            .load_sessions(&corpora)
            .into_iter()
            .map(|(id, s)| (id, Arc::new(RwLock::new(s))))
            .collect();
        let backend = config.backend_url.as_ref().map(|url| {
            BackendClient::new(url.clone(), config.backend_timeout()).expect("HTTP client builds")
        });
        Ok(Arc::new(Self {
            store,
            corpora: RwLock::new(corpora),
            sessions: RwLock::new(sessions),
            hash_dim: config.hash_embed_dim,
            backend,
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    async fn session(&self, id: &str) -> ApiResult<Arc<RwLock<Session>>> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    /// Writes every open session to disk.
    pub async fn flush(&self) -> Result<(), StoreError> {
        let sessions = self.sessions.read().await;
        for (id, session) in sessions.iter() {
            self.store.persist_session(id, &*session.read().await)?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusCreated {
    pub corpus_id: String,
    pub n_docs: usize,
    pub dim: Option<usize>,
}

async fn upload_corpus(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<CorpusCreated>)> {
    let corpus = ingest_corpus(BufReader::new(&body[..]))?;
    let corpus = resolve_embeddings(corpus, app.hash_dim, app.backend.as_ref()).await?;
    let id = app.store.save_corpus(&corpus)?;
    let created = CorpusCreated {
        corpus_id: id.clone(),
        n_docs: corpus.len(),
        dim: corpus.dim(),
    };
    app.corpora.write().await.entry(id).or_insert_with(|| Arc::new(corpus));
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    corpus_id: String,
    #[serde(default)]
    config: SessionConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let request: CreateSession = parse_json(&body)?;
    let corpus = app
        .corpora
        .read()
        .await
        .get(&request.corpus_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("corpus", &request.corpus_id))?;
    let session = Session::create(corpus, request.config)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    app.store.persist_session(&id, &session)?;
    app.sessions.write().await.insert(id.clone(), Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub phase: Phase,
    pub round: u32,
    pub n_labeled: usize,
    pub n_pool: usize,
    pub n_test: usize,
    pub n_pending: usize,
    pub label_set: Vec<String>,
    pub stop_reason: Option<String>,
}

fn summarize(session: &Session) -> SessionSummary {
    let s = session.state();
    SessionSummary {
        phase: s.phase,
        round: s.round,
        n_labeled: s.labeled_ids.len(),
        n_pool: session.pool_size(),
        n_test: s.test_ids.len(),
        n_pending: s.pending_batch.len() - s.pending_labels.len(),
        label_set: s.config.label_set.clone(),
        stop_reason: s.stop_reason.map(|r| r.to_string()),
    }
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionSummary>> {
    let session = app.session(&id).await?;
    let guard = session.read().await;
    Ok(Json(summarize(&guard)))
}

async fn next_batch(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Batch>> {
    let session = app.session(&id).await?;
    let batch = session.read().await.next_batch()?;
    Ok(Json(batch))
}

#[derive(Debug, Deserialize)]
struct LabelsRequest {
    labels: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelsResponse {
    pub phase: Phase,
    pub round_completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RoundRecord>,
}

async fn submit_labels(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<LabelsResponse>> {
    let request: LabelsRequest = parse_json(&body)?;
    let session = app.session(&id).await?;
    let mut guard = session.write().await;
    let mut next = guard.clone();
    let outcome = next.submit_labels(&request.labels)?;
    app.store.persist_session(&id, &next)?;
    *guard = next;
    Ok(Json(LabelsResponse {
        phase: outcome.phase,
        round_completed: outcome.completed.is_some(),
        metrics: outcome.completed,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub rounds: Vec<RoundRecord>,
}

async fn history(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<HistoryResponse>> {
    let session = app.session(&id).await?;
    let rounds = session.read().await.history().to_vec();
    Ok(Json(HistoryResponse { rounds }))
}

async fn history_csv(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = app.session(&id).await?;
    let guard = session.read().await;
    if guard.history().is_empty() {
        return Err(ApiError::not_found("history for session", &id));
    }
    let csv = export_history(guard.history(), guard.label_set())?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(app: Arc<AppState>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/corpora", post(upload_corpus))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next-batch", get(next_batch))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/history.csv", get(history_csv))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(app)
}

/// Serves on an already-bound listener until `shutdown` resolves, then
/// persists every open session.
pub async fn serve_with_listener<F>(
    listener: TcpListener,
    config: &ServiceConfig,
    shutdown: F,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>>
where
    F: Future<Output = ()> + Send + 'static,
{
    let app = AppState::open(config)?;
    let router = router(app.clone(), config.max_body_bytes);
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;
    app.flush().await?;
    Ok(())
}

pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    config.validate()?;
    let listener = TcpListener::bind(config.listen).await?;
    serve_with_listener(listener, &config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
