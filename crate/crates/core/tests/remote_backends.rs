use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use canvas_core::backends::{
    Answerer, BackendConfig, BackendErrorKind, RemoteAnswerer, RemoteClient, RemoteEmbedder, Role, Transport,
    TransportError, TransportResponse,
};
use canvas_core::config::{BackendChoice, Backends, EngineConfig};
use canvas_core::extraction::ConversationTurn;
use canvas_core::memory::{grounding_violations, CanvasMemory};
use canvas_core::scoring::Embedder;

/// Replays scripted responses and records every request it sees.
#[derive(Default)]
struct Scripted {
    replies: Mutex<VecDeque<Result<TransportResponse, TransportError>>>,
    seen: Mutex<Vec<(String, String, Value)>>,
}

impl Scripted {
    fn new(replies: Vec<Result<TransportResponse, TransportError>>) -> Arc<Self> {
        Arc::new(Self { replies: Mutex::new(replies.into()), ..Self::default() })
    }

    fn calls(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl Transport for Scripted {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, _: Duration) -> Result<TransportResponse, TransportError> {
        self.seen.lock().unwrap().push((url.to_owned(), bearer.to_owned(), body.clone()));
        self.replies.lock().unwrap().pop_front().expect("unscripted request")
    }
}

fn ok(body: Value) -> Result<TransportResponse, TransportError> {
    Ok(TransportResponse { status: 200, body: body.to_string() })
}

fn status(code: u16) -> Result<TransportResponse, TransportError> {
    Ok(TransportResponse { status: code, body: "{}".into() })
}

/// Each test uses its own variable so parallel tests never race.
fn config(key_env: &str, key: Option<&str>) -> BackendConfig {
    match key {
        Some(k) => std::env::set_var(key_env, k),
        None => std::env::remove_var(key_env),
    }
    BackendConfig {
        endpoint: "http://stub.invalid/v1/".into(),
        api_key_env: key_env.into(),
        retry_backoff_ms: 0,
        dimension: Some(3),
        ..BackendConfig::default()
    }
}

#[test]
fn missing_key_fails_before_any_request() {
    let t = Scripted::new(vec![]);
    let client = RemoteClient::new(Role::Answerer, config("CANVAS_TEST_KEY_MISSING", None), t.clone());
    let err = RemoteAnswerer::new(client, None).unwrap().answer("ctx", "q?").unwrap_err();
    assert!(matches!(err.kind, BackendErrorKind::Auth(_)), "{err}");
    assert_eq!(t.calls(), 0);
}

#[test]
fn embeddings_come_back_in_input_order() {
    let t = Scripted::new(vec![ok(json!({"data": [
        {"index": 2, "embedding": [0.0, 0.0, 3.0]},
        {"index": 0, "embedding": [1.0, 0.0, 0.0]},
        {"index": 1, "embedding": [0.0, 2.0, 0.0]},
    ]}))]);
    let client = RemoteClient::new(Role::Embedder, config("CANVAS_TEST_KEY_EMBED", Some("sk-embed")), t.clone());
    let e = RemoteEmbedder::new(client);
    let v = e.embed_batch(&["a", "b", "c"]).unwrap();
    assert_eq!(v, vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);

    let seen = t.seen.lock().unwrap();
    assert_eq!(seen[0].0, "http://stub.invalid/v1/embeddings");
    assert_eq!(seen[0].1, "sk-embed");
    assert_eq!(seen[0].2["input"], json!(["a", "b", "c"]));
}

#[test]
fn wrong_embedding_count_is_malformed() {
    let t = Scripted::new(vec![ok(json!({"data": [{"embedding": [1.0, 0.0, 0.0]}]}))]);
    let client = RemoteClient::new(Role::Embedder, config("CANVAS_TEST_KEY_COUNT", Some("k")), t);
    let err = RemoteEmbedder::new(client).embed_batch(&["a", "b"]).unwrap_err();
    assert!(matches!(err.kind, BackendErrorKind::MalformedResponse(_)));
}

#[test]
fn server_errors_are_retried() {
    let t = Scripted::new(vec![
        status(503),
        ok(json!({"choices": [{"message": {"content": "forty two"}}]})),
    ]);
    let client = RemoteClient::new(Role::Answerer, config("CANVAS_TEST_KEY_RETRY", Some("k")), t.clone());
    assert_eq!(client.chat("q").unwrap(), "forty two");
    assert_eq!(client.retries_used(), 1);
    assert_eq!(t.calls(), 2);
}

#[test]
fn auth_and_client_errors_are_not_retried() {
    let t = Scripted::new(vec![status(401), status(400)]);
    let client = RemoteClient::new(Role::Answerer, config("CANVAS_TEST_KEY_AUTH", Some("k")), t.clone());
    assert!(matches!(client.chat("q").unwrap_err().kind, BackendErrorKind::Auth(_)));
    assert!(matches!(client.chat("q").unwrap_err().kind, BackendErrorKind::Http { status: 400, .. }));
    assert_eq!(client.retries_used(), 0);
    assert_eq!(t.calls(), 2);
}

#[test]
fn retries_are_bounded() {
    let mut cfg = config("CANVAS_TEST_KEY_BOUND", Some("k"));
    cfg.retries = 2;
    let t = Scripted::new(vec![Err(TransportError::Timeout), status(429), status(500)]);
    let client = RemoteClient::new(Role::Answerer, cfg, t.clone());
    assert!(matches!(client.chat("q").unwrap_err().kind, BackendErrorKind::Http { status: 500, .. }));
    assert_eq!(t.calls(), 3);
}

#[test]
fn remote_extraction_keeps_only_grounded_quotes() {
    let reply = json!({"choices": [{"message": {"content": json!([
        {"kind": "decision", "content": "Use Postgres", "quote": "we will use Postgres", "source": "user", "confidence": 0.9},
        {"kind": "key_fact", "content": "Invented", "quote": "this text was never said", "source": "user"},
    ]).to_string()}}]});
    let t = Scripted::new(vec![ok(reply.clone()), ok(json!({"choices": [{"message": {"content": "[]"}}]}))]);

    let mut cfg = EngineConfig::default().resolve().unwrap();
    cfg.backends.extractor = BackendChoice::Remote(config("CANVAS_TEST_KEY_EXTRACT", Some("sk-secret-value")));
    let backends = Backends::with_transport(&cfg, t.clone()).unwrap();
    let mut memory = CanvasMemory::new(
        backends.extractor.as_ref(),
        backends.embedder.as_ref(),
        cfg.linking.clone(),
        cfg.analyzer(),
        true,
    )
    .unwrap();
    memory
        .ingest_all(&[ConversationTurn::new(1, "Fine, we will use Postgres for billing.", "Sounds good.")])
        .unwrap();
    let graph = memory.snapshot();
    assert_eq!(graph.object_count(), 1);
    assert!(grounding_violations(&graph, memory.log()).is_empty());

    // The key never lands in the config or the graph.
    let graph_text = String::from_utf8(canvas_core::model::serialize_graph(&graph)).unwrap();
    assert!(!graph_text.contains("sk-secret-value"));
    assert!(!cfg.to_toml().contains("sk-secret-value"));
}
