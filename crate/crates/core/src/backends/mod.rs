//! Model backends: the answering/summarizing interfaces, deterministic mocks,
//! and HTTP clients for remote extractor, embedder, reranker and chat models.
//!
//! The extractor, embedder and reranker traits live next to the code that
//! consumes them ([`crate::extraction::Extractor`], [`crate::scoring::Embedder`],
//! [`crate::retrieval::Reranker`]); this module implements them remotely.

mod mock;
mod remote;
mod transport;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{CountingAnswerer, EchoAnswerer, FirstSentenceSummarizer};
pub use remote::{
    BackendConfig, RemoteAnswerer, RemoteClient, RemoteEmbedder, RemoteExtractor, RemoteReranker,
    RemoteSummarizer,
};
pub use transport::{HttpTransport, Transport, TransportError, TransportResponse};

use crate::extraction::ConversationTurn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Extractor,
    Embedder,
    Reranker,
    Answerer,
    Summarizer,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Extractor => "extractor",
            Role::Embedder => "embedder",
            Role::Reranker => "reranker",
            Role::Answerer => "answerer",
            Role::Summarizer => "summarizer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendErrorKind {
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{role} backend: {kind}")]
pub struct BackendError {
    pub role: Role,
    pub kind: BackendErrorKind,
}

impl BackendError {
    pub fn new(role: Role, kind: BackendErrorKind) -> Self {
        Self { role, kind }
    }

    pub fn failed(role: Role, msg: impl Into<String>) -> Self {
        Self::new(role, BackendErrorKind::Failed(msg.into()))
    }
}

/// Produces an answer to `question` given the context a condition built.
pub trait Answerer: Send + Sync {
    fn answer(&self, context: &str, question: &str) -> Result<String, BackendError>;
}

/// Compresses a run of turns into summary text.
pub trait Summarizer: Send + Sync {
    fn summarize(&self, turns: &[ConversationTurn]) -> Result<String, BackendError>;
}
