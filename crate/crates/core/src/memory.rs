//! Turn-by-turn ingestion: extract, embed, store, link.
//!
//! The engine is the single writer. Readers take [`CanvasMemory::snapshot`],
//! an immutable `Arc` handle that later ingestion never mutates.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::extraction::{extract_turn, quote_is_grounded, ConversationTurn, ExtractionError, ExtractionStats, Extractor};
use crate::graph_build::{link_object, LinkError, LinkRules};
use crate::model::{AddOutcome, ArtifactKind, CanvasGraph, EdgeOrigin, GraphError, ObjectId};
use crate::scoring::{check_dimensions, Embedder};
use crate::backends::Role;
use crate::text::Analyzer;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnReport {
    pub turn: u32,
    pub added: usize,
    pub duplicates: usize,
    pub edges_added: usize,
    /// Set when a backend failed and the turn was skipped.
    pub skipped: Option<String>,
}

pub struct CanvasMemory<'a> {
    graph: Arc<CanvasGraph>,
    extractor: &'a dyn Extractor,
    embedder: &'a dyn Embedder,
    rules: LinkRules,
    analyzer: Analyzer,
    gleaning: bool,
    stats: ExtractionStats,
    log: Vec<ConversationTurn>,
}

impl<'a> CanvasMemory<'a> {
    pub fn new(
        extractor: &'a dyn Extractor,
        embedder: &'a dyn Embedder,
        rules: LinkRules,
        analyzer: Analyzer,
        gleaning: bool,
    ) -> Result<Self, LinkError> {
        rules.thresholds.validate()?;
        Ok(Self {
            graph: Arc::new(CanvasGraph::new()),
            extractor,
            embedder,
            rules,
            analyzer,
            gleaning,
            stats: ExtractionStats::default(),
            log: Vec::new(),
        })
    }

    /// Continues ingestion on top of an existing graph.
    pub fn with_graph(mut self, graph: CanvasGraph) -> Self {
        self.graph = Arc::new(graph);
        self
    }

    pub fn snapshot(&self) -> Arc<CanvasGraph> {
        Arc::clone(&self.graph)
    }

    pub fn stats(&self) -> &ExtractionStats {
        &self.stats
    }

    /// Turns ingested through this engine, in order.
    pub fn log(&self) -> &[ConversationTurn] {
        &self.log
    }

    pub fn into_graph(self) -> CanvasGraph {
        Arc::try_unwrap(self.graph).unwrap_or_else(|shared| (*shared).clone())
    }

    pub fn ingest_turn(&mut self, turn: &ConversationTurn) -> Result<TurnReport, IngestError> {
        let mut report = TurnReport { turn: turn.index, ..TurnReport::default() };
        let extracted = match extract_turn(self.extractor, turn, &self.graph, self.gleaning, &mut self.stats) {
            Ok(objs) => objs,
            Err(ExtractionError::Backend { turn: t, source }) => {
                return Ok(self.skip(turn, report, format!("extraction failed on turn {t}: {source}")));
            }
            Err(e) => return Err(e.into()),
        };

        let contents: Vec<&str> = extracted.iter().map(|o| o.content.as_str()).collect();
        let vectors = match self
            .embedder
            .embed_batch(&contents)
            .and_then(|v| check_dimensions(Role::Embedder, self.embedder.dimension(), &v).map(|_| v))
        {
            Ok(v) if v.len() == contents.len() => v,
            Ok(v) => {
                let msg = format!("embedder returned {} vectors for {} texts", v.len(), contents.len());
                return Ok(self.skip(turn, report, msg));
            }
            Err(e) => return Ok(self.skip(turn, report, e.to_string())),
        };

        let graph = Arc::make_mut(&mut self.graph);
        for (obj, emb) in extracted.into_iter().zip(vectors) {
            let id = obj.id.clone();
            match graph.add_object(obj.with_embedding(emb))? {
                AddOutcome::Duplicate => report.duplicates += 1,
                AddOutcome::Added => {
                    report.added += 1;
                    for edge in link_object(graph, &id, &self.rules, &self.analyzer)? {
                        if graph.add_edge(edge)? {
                            report.edges_added += 1;
                        }
                    }
                }
            }
        }
        graph.mark_turn(turn.index);
        self.log.push(turn.clone());
        Ok(report)
    }

    fn skip(&mut self, turn: &ConversationTurn, mut report: TurnReport, reason: String) -> TurnReport {
        warn!(turn = turn.index, %reason, "skipping turn");
        self.stats.failed_turns += 1;
        Arc::make_mut(&mut self.graph).mark_turn(turn.index);
        self.log.push(turn.clone());
        report.skipped = Some(reason);
        report
    }

    pub fn ingest_all(&mut self, turns: &[ConversationTurn]) -> Result<Vec<TurnReport>, IngestError> {
        turns.iter().map(|t| self.ingest_turn(t)).collect()
    }
}

/// Ids of objects whose quote is not found in the logged text of their turn.
pub fn grounding_violations(graph: &CanvasGraph, log: &[ConversationTurn]) -> Vec<ObjectId> {
    let by_index: BTreeMap<u32, &ConversationTurn> = log.iter().map(|t| (t.index, t)).collect();
    graph
        .objects()
        .filter(|o| {
            by_index
                .get(&o.turn)
                .map_or(true, |t| !quote_is_grounded(t, o.source, &o.quote))
        })
        .map(|o| o.id.clone())
        .collect()
}

/// Object counts per kind and edge counts per origin.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub objects: BTreeMap<ArtifactKind, usize>,
    pub edges: BTreeMap<EdgeOrigin, usize>,
    pub total_objects: usize,
    pub total_edges: usize,
}

impl GraphSummary {
    pub fn of(graph: &CanvasGraph) -> Self {
        let mut s = GraphSummary {
            total_objects: graph.object_count(),
            total_edges: graph.edge_count(),
            ..Self::default()
        };
        for o in graph.objects() {
            *s.objects.entry(o.kind).or_default() += 1;
        }
        for e in graph.edges() {
            *s.edges.entry(e.origin).or_default() += 1;
        }
        s
    }
}
