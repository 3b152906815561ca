//! Turn-level artifact extraction with an optional gleaning pass.
//!
//! Backends propose [`Candidate`]s; the engine decides what survives. Every
//! candidate's quote is checked against the turn text here, so an unreliable
//! extractor can never place an ungrounded quote in the graph.

use std::collections::HashSet;
use std::io::BufRead;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;
use crate::model::{ArtifactKind, CanvasGraph, CanvasObject, Source};
use crate::text::contains_normalized;

/// Cap on the number of prior objects summarized for the extractor.
pub const PRIOR_DIGEST_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub index: u32,
    #[serde(default)]
    pub user: String,
    #[serde(default)]
    pub assistant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl ConversationTurn {
    pub fn new(index: u32, user: impl Into<String>, assistant: impl Into<String>) -> Self {
        Self {
            index,
            user: user.into(),
            assistant: assistant.into(),
            timestamp: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.user.trim().is_empty() && self.assistant.trim().is_empty()
    }

    pub fn text(&self, source: Source) -> &str {
        match source {
            Source::User => &self.user,
            Source::Assistant => &self.assistant,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConversationError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: turn index {index} does not increase (previous {previous})")]
    NonIncreasing { line: usize, index: u32, previous: u32 },
    #[error("line {line}: turn {index} has neither user nor assistant text")]
    EmptyTurn { line: usize, index: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a line-delimited conversation: one `{index, user, assistant,
/// timestamp?}` record per line. Blank lines are skipped.
pub fn read_conversation<R: BufRead>(reader: R) -> Result<Vec<ConversationTurn>, ConversationError> {
    let mut turns: Vec<ConversationTurn> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let turn: ConversationTurn = serde_json::from_str(&line)
            .map_err(|source| ConversationError::Parse { line: line_no, source })?;
        if let Some(prev) = turns.last() {
            if turn.index <= prev.index {
                return Err(ConversationError::NonIncreasing {
                    line: line_no,
                    index: turn.index,
                    previous: prev.index,
                });
            }
        }
        if turn.is_empty() {
            return Err(ConversationError::EmptyTurn { line: line_no, index: turn.index });
        }
        turns.push(turn);
    }
    Ok(turns)
}

pub fn write_conversation(turns: &[ConversationTurn]) -> String {
    turns
        .iter()
        .map(|t| serde_json::to_string(t).expect("turn serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExtractionPass {
    First,
    Glean,
}

/// An artifact proposed by a backend, before grounding checks and identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: ArtifactKind,
    pub content: String,
    pub quote: String,
    pub source: Source,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestEntry {
    pub kind: ArtifactKind,
    pub content: String,
}

/// Kinds and contents of the most recent prior objects, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorDigest {
    pub entries: Vec<DigestEntry>,
}

impl PriorDigest {
    pub fn from_graph(graph: &CanvasGraph, limit: usize) -> Self {
        let mut objs: Vec<&CanvasObject> = graph.objects().collect();
        // stable: insertion order breaks turn ties
        objs.sort_by_key(|o| o.turn);
        let skip = objs.len().saturating_sub(limit);
        Self {
            entries: objs[skip..]
                .iter()
                .map(|o| DigestEntry { kind: o.kind, content: o.content.clone() })
                .collect(),
        }
    }
}

pub struct ExtractionRequest<'a> {
    pub turn: &'a ConversationTurn,
    pub prior: &'a PriorDigest,
    pub pass: ExtractionPass,
    /// Survivors of the first pass; empty on the first pass itself.
    pub first_pass: &'a [Candidate],
}

pub trait Extractor: Send + Sync {
    fn extract(&self, request: &ExtractionRequest<'_>) -> Result<Vec<Candidate>, BackendError>;
}

/// Deterministic pattern-scanning extractor used for offline runs.
///
/// The first pass emits one object per `DECISION:`, `TODO:`, `KEY_FACT:`,
/// `REMINDER:` or `INSIGHT:` marker; the glean pass emits a `KEY_FACT` per
/// `GLEAN:` marker. The payload runs from the marker to the end of the line,
/// the next marker, or a sentence terminator followed by whitespace.
#[derive(Debug, Clone)]
pub struct MarkerExtractor {
    marker: Regex,
}

impl Default for MarkerExtractor {
    fn default() -> Self {
        Self {
            marker: Regex::new(r"\b(DECISION|TODO|KEY_FACT|REMINDER|INSIGHT|GLEAN):").unwrap(),
        }
    }
}

impl MarkerExtractor {
    pub fn scan(&self, text: &str, source: Source, pass: ExtractionPass) -> Vec<Candidate> {
        let hits: Vec<_> = self.marker.captures_iter(text).collect();
        let mut out = Vec::new();
        for (i, cap) in hits.iter().enumerate() {
            let whole = cap.get(0).unwrap();
            let tag = &cap[1];
            let kind = match (pass, tag) {
                (ExtractionPass::Glean, "GLEAN") => ArtifactKind::KeyFact,
                (ExtractionPass::First, t) if t != "GLEAN" => ArtifactKind::from_tag(t).unwrap(),
                _ => continue,
            };
            let limit = hits.get(i + 1).map_or(text.len(), |n| n.get(0).unwrap().start());
            let payload = payload_span(&text[whole.end()..limit]);
            if payload.is_empty() {
                continue;
            }
            out.push(Candidate {
                kind,
                content: payload.to_owned(),
                quote: payload.to_owned(),
                source,
                confidence: 1.0,
            });
        }
        out
    }
}

fn payload_span(rest: &str) -> &str {
    let mut end = rest.len();
    let mut chars = rest.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' || c == '\r' {
            end = i;
            break;
        }
        if matches!(c, '.' | '!' | '?') && chars.peek().map_or(true, |(_, n)| n.is_whitespace()) {
            end = i;
            break;
        }
    }
    rest[..end].trim()
}

impl Extractor for MarkerExtractor {
    fn extract(&self, req: &ExtractionRequest<'_>) -> Result<Vec<Candidate>, BackendError> {
        let mut out = self.scan(&req.turn.user, Source::User, req.pass);
        out.extend(self.scan(&req.turn.assistant, Source::Assistant, req.pass));
        Ok(out)
    }
}

/// Per-run diagnostics for extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub turns: u64,
    pub first_pass_candidates: u64,
    pub glean_candidates: u64,
    pub rejected_quotes: u64,
    pub duplicate_candidates: u64,
    pub failed_turns: u64,
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("turn {index} is empty")]
    EmptyTurn { index: u32 },
    #[error("turn {index} arrives out of order (graph expects turn >= {expected})")]
    OutOfOrder { index: u32, expected: u32 },
    #[error("extraction failed on turn {turn}: {source}")]
    Backend {
        turn: u32,
        #[source]
        source: BackendError,
    },
}

/// True when `quote` is a contiguous, case- and whitespace-insensitive
/// substring of the turn's text for `source`.
pub fn quote_is_grounded(turn: &ConversationTurn, source: Source, quote: &str) -> bool {
    !quote.trim().is_empty() && contains_normalized(turn.text(source), quote)
}

/// Runs the first pass (and the glean pass when enabled) for one turn and
/// returns grounded, deduplicated objects without embeddings.
pub fn extract_turn(
    backend: &dyn Extractor,
    turn: &ConversationTurn,
    prior: &CanvasGraph,
    gleaning: bool,
    stats: &mut ExtractionStats,
) -> Result<Vec<CanvasObject>, ExtractionError> {
    if turn.is_empty() {
        return Err(ExtractionError::EmptyTurn { index: turn.index });
    }
    if turn.index < prior.next_turn() {
        return Err(ExtractionError::OutOfOrder {
            index: turn.index,
            expected: prior.next_turn(),
        });
    }
    stats.turns += 1;
    let digest = PriorDigest::from_graph(prior, PRIOR_DIGEST_LIMIT);
    let backend_err = |source| ExtractionError::Backend { turn: turn.index, source };

    let first = backend
        .extract(&ExtractionRequest {
            turn,
            prior: &digest,
            pass: ExtractionPass::First,
            first_pass: &[],
        })
        .map_err(backend_err)?;
    stats.first_pass_candidates += first.len() as u64;

    let mut seen = HashSet::new();
    let mut objects = Vec::new();
    let mut survivors = Vec::new();
    admit(turn, first, &mut seen, &mut objects, Some(&mut survivors), stats);

    if gleaning {
        let glean = backend
            .extract(&ExtractionRequest {
                turn,
                prior: &digest,
                pass: ExtractionPass::Glean,
                first_pass: &survivors,
            })
            .map_err(backend_err)?;
        stats.glean_candidates += glean.len() as u64;
        admit(turn, glean, &mut seen, &mut objects, None, stats);
    }
    Ok(objects)
}

fn admit(
    turn: &ConversationTurn,
    candidates: Vec<Candidate>,
    seen: &mut HashSet<crate::model::ObjectId>,
    objects: &mut Vec<CanvasObject>,
    mut survivors: Option<&mut Vec<Candidate>>,
    stats: &mut ExtractionStats,
) {
    for c in candidates {
        if !quote_is_grounded(turn, c.source, &c.quote) || c.content.trim().is_empty() {
            stats.rejected_quotes += 1;
            continue;
        }
        let confidence = if c.confidence.is_finite() { c.confidence.clamp(0.0, 1.0) } else { 0.0 };
        let obj = CanvasObject::new(c.kind, c.content.trim(), c.quote.trim(), c.source, turn.index, confidence);
        if !seen.insert(obj.id.clone()) {
            stats.duplicate_candidates += 1;
            continue;
        }
        if let Some(s) = survivors.as_deref_mut() {
            s.push(c);
        }
        objects.push(obj);
    }
}
