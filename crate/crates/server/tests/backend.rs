use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use activelabel::backend::{BackendClient, BackendError, MAX_RETRIES};
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

/// Mock backend: `behaviour` maps (call index, texts) to a status and body.
type Behaviour = fn(usize, &[String]) -> (StatusCode, Value);

async fn spawn_backend(behaviour: Behaviour) -> (String, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let state = (calls.clone(), behaviour);
    let app = Router::new()
        .route(
            "/embed",
            post(|State((calls, f)): State<(Arc<AtomicUsize>, Behaviour)>, Json(body): Json<Value>| async move {
                let texts: Vec<String> = serde_json::from_value(body["texts"].clone()).unwrap_or_default();
                let n = calls.fetch_add(1, Ordering::SeqCst);
                let (status, body) = f(n, &texts);
                (status, Json(body))
            }),
        )
        .with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), calls)
}

fn client(url: &str) -> BackendClient {
    BackendClient::new(url, Duration::from_secs(5)).unwrap().with_retry_delay(Duration::from_millis(1))
}

fn texts(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Encodes each text's length so order can be checked.
fn echo_lengths(_: usize, texts: &[String]) -> (StatusCode, Value) {
    let rows: Vec<Vec<f64>> = texts.iter().map(|t| vec![t.len() as f64, 1.0]).collect();
    (StatusCode::OK, json!({ "embeddings": rows }))
}

#[tokio::test]
async fn returns_one_vector_per_text_in_order() {
    let (url, _) = spawn_backend(echo_lengths).await;
    let c = client(&url);
    let got = c.fetch_embeddings(&texts(&["a", "bbb"])).await.unwrap();
    assert_eq!(got, vec![vec![1.0, 1.0], vec![3.0, 1.0]]);
    assert_eq!(c.dim(), Some(2));
}

#[tokio::test]
async fn fetch_all_chunks_and_keeps_order() {
    let (url, calls) = spawn_backend(echo_lengths).await;
    let many: Vec<String> = (0..150).map(|i| "x".repeat(i % 7 + 1)).collect();
    let got = client(&url).fetch_all(&many).await.unwrap();
    assert_eq!(got.len(), 150);
    assert!(got.iter().zip(&many).all(|(v, t)| v[0] == t.len() as f64));
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn count_mismatch_is_rejected() {
    let (url, _) = spawn_backend(|_, _| (StatusCode::OK, json!({ "embeddings": [[1.0], [2.0], [3.0]] }))).await;
    let err = client(&url).fetch_embeddings(&texts(&["a", "b"])).await.unwrap_err();
    assert_eq!(err, BackendError::CountMismatch { sent: 2, received: 3 });
    assert!(err.to_string().contains("count mismatch"));
}

#[tokio::test]
async fn dimension_drift_between_calls() {
    let (url, _) = spawn_backend(|n, texts| {
        let dim = if n == 0 { 64 } else { 128 };
        (StatusCode::OK, json!({ "embeddings": vec![vec![0.5; dim]; texts.len()] }))
    })
    .await;
    let c = client(&url);
    c.fetch_embeddings(&texts(&["a"])).await.unwrap();
    let err = c.fetch_embeddings(&texts(&["b"])).await.unwrap_err();
    assert_eq!(err, BackendError::DimensionDrift { expected: 64, got: 128 });
    assert!(err.to_string().contains("dimension drift"));
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let (url, calls) = spawn_backend(|n, texts| {
        if n < 2 {
            (StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "warming up" }))
        } else {
            echo_lengths(n, texts)
        }
    })
    .await;
    let got = client(&url).fetch_embeddings(&texts(&["ab"])).await.unwrap();
    assert_eq!(got, vec![vec![2.0, 1.0]]);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn persistent_failure_gives_up_after_retries() {
    let (url, calls) = spawn_backend(|_, _| (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "boom" }))).await;
    let err = client(&url).fetch_embeddings(&texts(&["a"])).await.unwrap_err();
    assert_eq!(err, BackendError::Status { status: 500, message: "boom".into() });
    assert_eq!(calls.load(Ordering::SeqCst), MAX_RETRIES + 1);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let (url, calls) = spawn_backend(|_, _| (StatusCode::BAD_REQUEST, json!({ "error": "missing texts" }))).await;
    let err = client(&url).fetch_embeddings(&texts(&["a"])).await.unwrap_err();
    assert_eq!(err, BackendError::Status { status: 400, message: "missing texts".into() });
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn unreachable_backend() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = client(&format!("http://{addr}")).fetch_embeddings(&texts(&["a"])).await.unwrap_err();
    assert!(matches!(err, BackendError::Unreachable(_)));
}

#[tokio::test]
async fn malformed_and_empty() {
    let (url, _) = spawn_backend(|_, _| (StatusCode::OK, json!({ "vectors": [] }))).await;
    let c = client(&url);
    assert!(matches!(c.fetch_embeddings(&texts(&["a"])).await, Err(BackendError::Malformed(_))));
    assert_eq!(c.fetch_embeddings(&[]).await.unwrap_err(), BackendError::EmptyInput);
}
