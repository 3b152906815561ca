//! Conversation memory built from typed, verbatim-grounded artifacts.
//!
//! Turns are mined for decisions, todos, facts, reminders and insights. Each
//! artifact keeps the exact quote it came from, is linked into an append-only
//! graph, and is retrieved under a token budget for prompt injection.

pub mod backends;
pub mod config;
pub mod extraction;
pub mod graph_build;
pub mod memory;
pub mod model;
pub mod retrieval;
pub mod scoring;
pub mod text;

pub use model::{ArtifactKind, CanvasEdge, CanvasGraph, CanvasObject, EdgeKind, ObjectId, Source};
