//! Artifact data model and the append-only canvas graph.
//!
//! A [`CanvasObject`] is one typed, verbatim-grounded artifact pulled out of a
//! conversation turn. Objects are linked by [`CanvasEdge`]s inside a
//! [`CanvasGraph`], which only ever grows: duplicates are rejected, nothing is
//! deleted.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::normalize_whitespace_lower;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArtifactKind {
    Decision,
    Todo,
    KeyFact,
    Reminder,
    Insight,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 5] = [
        ArtifactKind::Decision,
        ArtifactKind::Todo,
        ArtifactKind::KeyFact,
        ArtifactKind::Reminder,
        ArtifactKind::Insight,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ArtifactKind::Decision => "DECISION",
            ArtifactKind::Todo => "TODO",
            ArtifactKind::KeyFact => "KEY_FACT",
            ArtifactKind::Reminder => "REMINDER",
            ArtifactKind::Insight => "INSIGHT",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        let upper = tag.trim().to_ascii_uppercase().replace([' ', '-'], "_");
        Self::ALL.into_iter().find(|k| k.tag() == upper)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    User,
    Assistant,
}

/// Content hash of `(kind, normalized content, turn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn derive(kind: ArtifactKind, content: &str, turn: u32) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(kind.tag().as_bytes());
        hasher.update([0u8]);
        hasher.update(normalize_whitespace_lower(content).as_bytes());
        hasher.update([0u8]);
        hasher.update(turn.to_le_bytes());
        let digest = hasher.finalize();
        ObjectId(hex::encode(&digest[..16]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasObject {
    pub id: ObjectId,
    pub kind: ArtifactKind,
    pub content: String,
    pub quote: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    pub turn: u32,
    pub confidence: f64,
}

impl CanvasObject {
    pub fn new(
        kind: ArtifactKind,
        content: impl Into<String>,
        quote: impl Into<String>,
        source: Source,
        turn: u32,
        confidence: f64,
    ) -> Self {
        let content = content.into();
        Self {
            id: ObjectId::derive(kind, &content, turn),
            kind,
            content,
            quote: quote.into(),
            source,
            embedding: None,
            turn,
            confidence,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let invalid = |reason: &str| {
            Err(GraphError::InvalidObject {
                id: self.id.clone(),
                reason: reason.to_owned(),
            })
        };
        if self.quote.trim().is_empty() {
            return invalid("empty quote");
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return invalid("confidence outside [0, 1]");
        }
        if self.id != ObjectId::derive(self.kind, &self.content, self.turn) {
            return invalid("id does not match (kind, content, turn)");
        }
        if let Some(e) = &self.embedding {
            if e.is_empty() || e.iter().any(|x| !x.is_finite()) {
                return invalid("embedding empty or non-finite");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    Reference,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeOrigin {
    Similarity,
    Keyword,
    TemporalHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasEdge {
    pub src: ObjectId,
    pub dst: ObjectId,
    pub kind: EdgeKind,
    pub weight: f64,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    Duplicate,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("invalid object {id}: {reason}")]
    InvalidObject { id: ObjectId, reason: String },
    #[error("invalid edge {src} -> {dst}: {reason}")]
    InvalidEdge {
        src: ObjectId,
        dst: ObjectId,
        reason: String,
    },
    #[error("malformed graph document: {0}")]
    MalformedInput(String),
    #[error("unsupported graph format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
}

/// Append-only store of objects and edges with a two-way adjacency index.
///
/// Objects keep their insertion order. Cloning is the snapshot mechanism: the
/// ingestion engine wraps the graph in an `Arc` and readers hold their own
/// handle while the writer copies on write.
#[derive(Debug, Clone, Default)]
pub struct CanvasGraph {
    objects: IndexMap<ObjectId, CanvasObject>,
    edges: Vec<CanvasEdge>,
    edge_keys: HashSet<(ObjectId, ObjectId, EdgeKind)>,
    adjacency: BTreeMap<ObjectId, Vec<usize>>,
    next_turn: u32,
}

impl PartialEq for CanvasGraph {
    fn eq(&self, other: &Self) -> bool {
        self.next_turn == other.next_turn
            && self.objects.len() == other.objects.len()
            && self.objects.iter().zip(other.objects.iter()).all(|(a, b)| a == b)
            && self.edges == other.edges
    }
}

impl CanvasGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_object(&mut self, obj: CanvasObject) -> Result<AddOutcome, GraphError> {
        obj.validate()?;
        if self.objects.contains_key(&obj.id) {
            return Ok(AddOutcome::Duplicate);
        }
        self.next_turn = self.next_turn.max(obj.turn + 1);
        self.objects.insert(obj.id.clone(), obj);
        Ok(AddOutcome::Added)
    }

    /// Inserts an edge. Returns `false` when the `(src, dst, kind)` triple is
    /// already present.
    pub fn add_edge(&mut self, edge: CanvasEdge) -> Result<bool, GraphError> {
        let bad = |reason: &str| {
            Err(GraphError::InvalidEdge {
                src: edge.src.clone(),
                dst: edge.dst.clone(),
                reason: reason.to_owned(),
            })
        };
        if edge.src == edge.dst {
            return bad("self loop");
        }
        let (Some(src), Some(dst)) = (self.objects.get(&edge.src), self.objects.get(&edge.dst)) else {
            return bad("endpoint not in graph");
        };
        if !(0.0..=1.0).contains(&edge.weight) {
            return bad("weight outside [0, 1]");
        }
        if edge.kind == EdgeKind::Causal && src.turn > dst.turn {
            return bad("causal edge points backward in time");
        }
        let key = (edge.src.clone(), edge.dst.clone(), edge.kind);
        if self.edge_keys.contains(&key) {
            return Ok(false);
        }
        let idx = self.edges.len();
        self.adjacency.entry(edge.src.clone()).or_default().push(idx);
        self.adjacency.entry(edge.dst.clone()).or_default().push(idx);
        self.edge_keys.insert(key);
        self.edges.push(edge);
        Ok(true)
    }

    /// Records that `turn` has been processed, even if it produced no objects.
    pub fn mark_turn(&mut self, turn: u32) {
        self.next_turn = self.next_turn.max(turn + 1);
    }

    pub fn next_turn(&self) -> u32 {
        self.next_turn
    }

    pub fn get(&self, id: &ObjectId) -> Option<&CanvasObject> {
        self.objects.get(id)
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.objects.contains_key(id)
    }

    pub fn objects(&self) -> impl ExactSizeIterator<Item = &CanvasObject> {
        self.objects.values()
    }

    pub fn edges(&self) -> &[CanvasEdge] {
        &self.edges
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Every edge touching `id`, in insertion order, regardless of direction.
    pub fn incident_edges(&self, id: &ObjectId) -> impl Iterator<Item = &CanvasEdge> {
        self.adjacency
            .get(id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    /// Neighbours over both edge kinds and both directions, first-seen order.
    pub fn neighbors(&self, id: &ObjectId) -> Vec<&ObjectId> {
        let mut seen = HashSet::new();
        self.incident_edges(id)
            .map(|e| if &e.src == id { &e.dst } else { &e.src })
            .filter(|n| seen.insert(*n))
            .collect()
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut CanvasObject> {
        self.objects.get_mut(id)
    }
}

pub const GRAPH_FORMAT: &str = "canvas-graph";
pub const GRAPH_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    format: String,
    version: u64,
    next_turn: u32,
    objects: Vec<CanvasObject>,
    edges: Vec<CanvasEdge>,
}

/// Writes the versioned JSON graph document. Floats use the shortest
/// representation that parses back to the same bits.
pub fn serialize_graph(graph: &CanvasGraph) -> Vec<u8> {
    let doc = GraphDocument {
        format: GRAPH_FORMAT.to_owned(),
        version: GRAPH_FORMAT_VERSION,
        next_turn: graph.next_turn,
        objects: graph.objects.values().cloned().collect(),
        edges: graph.edges.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("graph document is always serializable");
    out.push(b'\n');
    out
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<CanvasGraph, GraphError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| GraphError::MalformedInput(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| GraphError::MalformedInput("missing version".into()))?
        .as_u64()
        .ok_or_else(|| GraphError::MalformedInput("version is not an integer".into()))?;
    if version != GRAPH_FORMAT_VERSION {
        return Err(GraphError::VersionMismatch {
            found: version,
            expected: GRAPH_FORMAT_VERSION,
        });
    }
    let doc: GraphDocument =
        serde_json::from_value(value).map_err(|e| GraphError::MalformedInput(e.to_string()))?;
    if doc.format != GRAPH_FORMAT {
        return Err(GraphError::MalformedInput(format!("unknown format tag {:?}", doc.format)));
    }
    let mut graph = CanvasGraph::new();
    for obj in doc.objects {
        let id = obj.id.clone();
        let outcome = graph
            .add_object(obj)
            .map_err(|e| GraphError::MalformedInput(e.to_string()))?;
        if outcome == AddOutcome::Duplicate {
            return Err(GraphError::MalformedInput(format!("duplicate object id {id}")));
        }
    }
    for edge in doc.edges {
        let inserted = graph
            .add_edge(edge)
            .map_err(|e| GraphError::MalformedInput(e.to_string()))?;
        if !inserted {
            return Err(GraphError::MalformedInput("duplicate edge".into()));
        }
    }
    if doc.next_turn < graph.next_turn {
        return Err(GraphError::MalformedInput(
            "next_turn is below an object's turn".into(),
        ));
    }
    graph.next_turn = doc.next_turn;
    Ok(graph)
}
