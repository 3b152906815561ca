//! HTTP clients speaking OpenAI-compatible chat/embedding endpoints and a
//! Cohere/Jina-style `/rerank` endpoint.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::debug;

use super::transport::{Transport, TransportError};
use super::{Answerer, BackendError, BackendErrorKind, Role, Summarizer};
use crate::extraction::{quote_is_grounded, Candidate, ConversationTurn, ExtractionPass, ExtractionRequest, Extractor};
use crate::model::{ArtifactKind, ObjectId, Source};
use crate::retrieval::{RerankCandidate, Reranker};
use crate::scoring::Embedder;

/// Connection settings for one backend role. The API key itself is never
/// stored; only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub temperature: f64,
    pub max_concurrency: usize,
    /// Expected embedding dimension, when known.
    pub dimension: Option<usize>,
    /// Log full request and response bodies at debug level.
    pub debug: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".to_owned(),
            model: "gpt-4o-mini".to_owned(),
            api_key_env: "OPENAI_API_KEY".to_owned(),
            timeout_secs: 60.0,
            retries: 3,
            retry_backoff_ms: 500,
            temperature: 0.0,
            max_concurrency: 4,
            dimension: None,
            debug: false,
        }
    }
}

impl BackendConfig {
    pub fn for_role(role: Role) -> Self {
        let base = Self::default();
        match role {
            Role::Extractor | Role::Summarizer => Self { temperature: 0.1, ..base },
            Role::Answerer => base,
            Role::Embedder => Self {
                model: "text-embedding-3-small".to_owned(),
                dimension: Some(1536),
                ..base
            },
            Role::Reranker => Self {
                model: "BAAI/bge-reranker-base".to_owned(),
                ..base
            },
        }
    }
}

/// Counting semaphore capping in-flight requests per client.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Shared request machinery: auth lookup, bounded retries, shape checks.
pub struct RemoteClient {
    role: Role,
    config: BackendConfig,
    transport: Arc<dyn Transport>,
    gate: Gate,
    retries: AtomicU64,
}

impl RemoteClient {
    pub fn new(role: Role, config: BackendConfig, transport: Arc<dyn Transport>) -> Self {
        let gate = Gate::new(config.max_concurrency);
        Self { role, config, transport, gate, retries: AtomicU64::new(0) }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Retries performed so far across all calls.
    pub fn retries_used(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn err(&self, kind: BackendErrorKind) -> BackendError {
        BackendError::new(self.role, kind)
    }

    fn malformed(&self, msg: impl Into<String>) -> BackendError {
        self.err(BackendErrorKind::MalformedResponse(msg.into()))
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                self.err(BackendErrorKind::Auth(format!(
                    "environment variable {} is not set",
                    self.config.api_key_env
                )))
            })?;
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path.trim_start_matches('/'));
        let timeout = Duration::from_secs_f64(self.config.timeout_secs.max(0.001));
        if self.config.debug {
            debug!(role = %self.role, %url, authorization = "Bearer ***", body = %body, "request");
        }

        let _slot = self.gate.acquire();
        let mut attempt = 0;
        loop {
            let outcome = self.transport.post_json(&url, &key, body, timeout);
            let retryable = match outcome {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    if self.config.debug {
                        debug!(role = %self.role, status = resp.status, body = %resp.body, "response");
                    }
                    return serde_json::from_str(&resp.body).map_err(|e| self.malformed(e.to_string()));
                }
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    return Err(self.err(BackendErrorKind::Auth(format!("http status {}", resp.status))));
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    self.err(BackendErrorKind::Http { status: resp.status, body: resp.body })
                }
                Ok(resp) => {
                    return Err(self.err(BackendErrorKind::Http { status: resp.status, body: resp.body }));
                }
                Err(TransportError::Timeout) => self.err(BackendErrorKind::Timeout),
                Err(TransportError::Connect(m)) => self.err(BackendErrorKind::Transport(m)),
            };
            if attempt >= self.config.retries {
                return Err(retryable);
            }
            attempt += 1;
            self.retries.fetch_add(1, Ordering::Relaxed);
            debug!(role = %self.role, attempt, error = %retryable, "retrying");
            let backoff = self.config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
            if backoff > 0 {
                std::thread::sleep(Duration::from_millis(backoff));
            }
        }
    }

    pub fn chat(&self, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let v = self.post("chat/completions", &body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| self.malformed("missing choices[0].message.content"))
    }

    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let v = self.post("embeddings", &json!({"model": self.config.model, "input": texts}))?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| self.malformed("missing data array"))?;
        if data.len() != texts.len() {
            return Err(self.malformed(format!("{} embeddings for {} inputs", data.len(), texts.len())));
        }
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let vector: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| self.malformed("missing embedding"))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| self.malformed("non-numeric embedding component")))
                .collect::<Result<_, _>>()?;
            match slots.get_mut(index) {
                Some(slot @ None) => *slot = Some(vector),
                _ => return Err(self.malformed(format!("bad or repeated embedding index {index}"))),
            }
        }
        let vectors: Vec<Vec<f64>> = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
        let dim = self.config.dimension.unwrap_or(vectors[0].len());
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(self.malformed("inconsistent embedding dimensions"));
        }
        Ok(vectors)
    }

    /// Returns `(document index, relevance)` pairs as reported.
    pub fn rerank(&self, query: &str, documents: &[&str]) -> Result<Vec<(usize, f64)>, BackendError> {
        let body = json!({"model": self.config.model, "query": query, "documents": documents});
        let v = self.post("rerank", &body)?;
        let results = v
            .get("results")
            .and_then(Value::as_array)
            .ok_or_else(|| self.malformed("missing results array"))?;
        results
            .iter()
            .map(|r| {
                let index = r.get("index").and_then(Value::as_u64).map(|i| i as usize);
                let score = r.get("relevance_score").or_else(|| r.get("score")).and_then(Value::as_f64);
                match (index, score) {
                    (Some(i), Some(s)) if i < documents.len() => Ok((i, s)),
                    _ => Err(self.malformed("result without valid index/score")),
                }
            })
            .collect()
    }
}

const DEFAULT_EXTRACT_FIRST: &str = include_str!("../../assets/prompts/extract_first.txt");
const DEFAULT_EXTRACT_GLEAN: &str = include_str!("../../assets/prompts/extract_glean.txt");
const DEFAULT_ANSWER: &str = include_str!("../../assets/prompts/answer.txt");
const DEFAULT_SUMMARIZE: &str = include_str!("../../assets/prompts/summarize.txt");

fn load_or(dir: Option<&Path>, name: &str, fallback: &str) -> std::io::Result<String> {
    match dir {
        Some(d) => std::fs::read_to_string(d.join(name)),
        None => Ok(fallback.to_owned()),
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    vars.iter()
        .fold(template.to_owned(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

pub struct RemoteExtractor {
    client: RemoteClient,
    first: String,
    glean: String,
}

impl RemoteExtractor {
    /// Loads `extract_first.txt` and `extract_glean.txt` from `prompts_dir`,
    /// or uses the bundled copies when no directory is given.
    pub fn new(client: RemoteClient, prompts_dir: Option<&Path>) -> std::io::Result<Self> {
        Ok(Self {
            client,
            first: load_or(prompts_dir, "extract_first.txt", DEFAULT_EXTRACT_FIRST)?,
            glean: load_or(prompts_dir, "extract_glean.txt", DEFAULT_EXTRACT_GLEAN)?,
        })
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }
}

/// Parses the model's artifact list, dropping malformed records one by one.
pub(crate) fn parse_candidates(response: &str, turn: &ConversationTurn) -> Vec<Candidate> {
    let (Some(start), Some(end)) = (response.find('['), response.rfind(']')) else {
        return Vec::new();
    };
    if end < start {
        return Vec::new();
    }
    let Ok(Value::Array(items)) = serde_json::from_str::<Value>(&response[start..=end]) else {
        return Vec::new();
    };
    items
        .iter()
        .filter_map(|item| {
            let field = |k: &str| item.get(k).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty());
            let kind = field("kind").or_else(|| field("type")).and_then(ArtifactKind::from_tag)?;
            let content = field("content")?.to_owned();
            let quote = field("quote").or_else(|| field("citation"))?.to_owned();
            let source = match field("source").map(str::to_ascii_lowercase).as_deref() {
                Some("user") => Source::User,
                Some("assistant") => Source::Assistant,
                Some(_) => return None,
                None if quote_is_grounded(turn, Source::User, &quote) => Source::User,
                None => Source::Assistant,
            };
            let confidence = match item.get("confidence") {
                None => 0.5,
                Some(v) => v.as_f64().filter(|c| (0.0..=1.0).contains(c))?,
            };
            Some(Candidate { kind, content, quote, source, confidence })
        })
        .collect()
}

fn digest_text(req: &ExtractionRequest<'_>) -> String {
    if req.prior.entries.is_empty() {
        return "(none)".to_owned();
    }
    req.prior
        .entries
        .iter()
        .map(|e| format!("- [{}] {}", e.kind, e.content))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Extractor for RemoteExtractor {
    fn extract(&self, req: &ExtractionRequest<'_>) -> Result<Vec<Candidate>, BackendError> {
        let template = match req.pass {
            ExtractionPass::First => &self.first,
            ExtractionPass::Glean => &self.glean,
        };
        let first_pass = serde_json::to_string_pretty(req.first_pass).unwrap_or_default();
        let prompt = fill(
            template,
            &[
                ("prior", &digest_text(req)),
                ("first_pass", &first_pass),
                ("user", &req.turn.user),
                ("assistant", &req.turn.assistant),
            ],
        );
        let response = self.client.chat(&prompt)?;
        Ok(parse_candidates(&response, req.turn))
    }
}

pub struct RemoteEmbedder {
    client: RemoteClient,
    dimension: usize,
}

impl RemoteEmbedder {
    pub fn new(client: RemoteClient) -> Self {
        let dimension = client.config.dimension.unwrap_or(1536);
        Self { client, dimension }
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.client
            .embed(&[text])?
            .pop()
            .ok_or_else(|| self.client.malformed("empty embedding response"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, BackendError> {
        self.client.embed(texts)
    }
}

pub struct RemoteReranker {
    client: RemoteClient,
}

impl RemoteReranker {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl Reranker for RemoteReranker {
    fn rerank(&self, query: &str, candidates: &[RerankCandidate]) -> Result<Vec<(ObjectId, f64)>, BackendError> {
        let docs: Vec<&str> = candidates.iter().map(|c| c.text.as_str()).collect();
        Ok(self
            .client
            .rerank(query, &docs)?
            .into_iter()
            .map(|(i, s)| (candidates[i].id.clone(), s))
            .collect())
    }
}

pub struct RemoteAnswerer {
    client: RemoteClient,
    template: String,
}

impl RemoteAnswerer {
    pub fn new(client: RemoteClient, prompts_dir: Option<&Path>) -> std::io::Result<Self> {
        Ok(Self { client, template: load_or(prompts_dir, "answer.txt", DEFAULT_ANSWER)? })
    }
}

impl Answerer for RemoteAnswerer {
    fn answer(&self, context: &str, question: &str) -> Result<String, BackendError> {
        self.client
            .chat(&fill(&self.template, &[("context", context), ("question", question)]))
    }
}

pub struct RemoteSummarizer {
    client: RemoteClient,
    template: String,
}

impl RemoteSummarizer {
    pub fn new(client: RemoteClient, prompts_dir: Option<&Path>) -> std::io::Result<Self> {
        Ok(Self { client, template: load_or(prompts_dir, "summarize.txt", DEFAULT_SUMMARIZE)? })
    }
}

impl Summarizer for RemoteSummarizer {
    fn summarize(&self, turns: &[ConversationTurn]) -> Result<String, BackendError> {
        let transcript: String = turns
            .iter()
            .map(|t| format!("Turn {}\nUSER: {}\nASSISTANT: {}\n", t.index, t.user, t.assistant))
            .collect();
        self.client.chat(&fill(&self.template, &[("transcript", &transcript)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::TransportResponse;

    #[test]
    fn parse_drops_malformed_records_individually() {
        let turn = ConversationTurn::new(0, "We will use Redis for caching.", "Agreed, Redis it is.");
        let resp = r#"Here you go:
```json
[
  {"kind": "decision", "content": "Use Redis", "quote": "use Redis for caching", "source": "user", "confidence": 0.9},
  {"kind": "banana", "content": "x", "quote": "y"},
  {"kind": "key_fact", "content": "no quote"},
  {"type": "insight", "content": "Redis agreed", "citation": "Redis it is", "confidence": 0.7},
  {"kind": "todo", "content": "c", "quote": "q", "confidence": 7}
]
```"#;
        let c = parse_candidates(resp, &turn);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].kind, ArtifactKind::Decision);
        assert_eq!(c[1].source, Source::Assistant);
        assert!(parse_candidates("no json here", &turn).is_empty());
    }

    #[test]
    fn fill_replaces_placeholders() {
        assert_eq!(fill("a {x} b {y} {x}", &[("x", "1"), ("y", "2")]), "a 1 b 2 1");
    }

    struct Never;
    impl Transport for Never {
        fn post_json(&self, _: &str, _: &str, _: &Value, _: Duration) -> Result<TransportResponse, TransportError> {
            unreachable!()
        }
    }

    #[test]
    fn role_defaults_follow_reported_hyperparameters() {
        assert_eq!(BackendConfig::for_role(Role::Extractor).temperature, 0.1);
        assert_eq!(BackendConfig::for_role(Role::Answerer).temperature, 0.0);
        assert_eq!(BackendConfig::for_role(Role::Embedder).model, "text-embedding-3-small");
        let c = RemoteClient::new(Role::Answerer, BackendConfig::default(), Arc::new(Never));
        assert_eq!(c.retries_used(), 0);
    }
}
