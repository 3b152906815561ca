//! Edge creation for newly ingested objects.
//!
//! Three rules run against every existing object:
//! reference edges from similarity or keyword overlap, causal edges for
//! configured kind pairs above a looser similarity bar, and temporal-heuristic
//! causal edges from recent facts/reminders into decisions regardless of
//! similarity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArtifactKind, CanvasEdge, CanvasGraph, EdgeKind, EdgeOrigin, ObjectId};
use crate::scoring::{cosine_sim, ScoringError};
use crate::text::{jaccard, Analyzer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkThresholds {
    pub theta_ref: f64,
    pub theta_causal: f64,
    pub keyword_edge_min: f64,
    pub temporal_window: u32,
}

impl Default for LinkThresholds {
    fn default() -> Self {
        Self {
            theta_ref: 0.5,
            theta_causal: 0.45,
            keyword_edge_min: 0.5,
            temporal_window: 3,
        }
    }
}

impl LinkThresholds {
    /// Reference threshold with the causal threshold 0.05 below it.
    pub fn from_theta_ref(theta_ref: f64) -> Self {
        Self {
            theta_ref,
            theta_causal: theta_ref - 0.05,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let ok = self.theta_causal > 0.0
            && self.theta_causal <= self.theta_ref
            && self.theta_ref < 1.0
            && (0.0..=1.0).contains(&self.keyword_edge_min)
            && self.temporal_window > 0;
        if ok {
            Ok(())
        } else {
            Err(LinkError::InvalidThresholds(*self))
        }
    }
}

/// `(source kind, target kind)` pairs eligible for similarity causal edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CausalPairs(pub BTreeSet<(ArtifactKind, ArtifactKind)>);

impl Default for CausalPairs {
    fn default() -> Self {
        use ArtifactKind::*;
        Self(
            [(KeyFact, Decision), (Reminder, Decision), (Insight, Decision), (Decision, Todo)]
                .into_iter()
                .collect(),
        )
    }
}

impl CausalPairs {
    pub fn contains(&self, from: ArtifactKind, to: ArtifactKind) -> bool {
        self.0.contains(&(from, to))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkRules {
    #[serde(default)]
    pub thresholds: LinkThresholds,
    #[serde(default)]
    pub causal_pairs: CausalPairs,
}

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("object {0} has no embedding")]
    MissingEmbedding(ObjectId),
    #[error("object {0} is not in the graph")]
    UnknownObject(ObjectId),
    #[error("invalid link thresholds {0:?}")]
    InvalidThresholds(LinkThresholds),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Computes the edges `new_id` gains against every other object in `graph`.
/// The graph is not modified.
pub fn link_object(
    graph: &CanvasGraph,
    new_id: &ObjectId,
    rules: &LinkRules,
    analyzer: &Analyzer,
) -> Result<Vec<CanvasEdge>, LinkError> {
    let th = &rules.thresholds;
    th.validate()?;
    let new = graph.get(new_id).ok_or_else(|| LinkError::UnknownObject(new_id.clone()))?;
    let new_emb = new
        .embedding
        .as_deref()
        .ok_or_else(|| LinkError::MissingEmbedding(new_id.clone()))?;
    let new_tokens = analyzer.content_token_set(&new.content);

    let mut edges = Vec::new();
    for old in graph.objects().filter(|o| &o.id != new_id) {
        let old_emb = old
            .embedding
            .as_deref()
            .ok_or_else(|| LinkError::MissingEmbedding(old.id.clone()))?;
        let sim = cosine_sim(old_emb, new_emb)?;
        let edge = |kind, weight: f64, origin| CanvasEdge {
            src: old.id.clone(),
            dst: new_id.clone(),
            kind,
            weight: weight.clamp(0.0, 1.0),
            origin,
        };

        if sim >= th.theta_ref {
            edges.push(edge(EdgeKind::Reference, sim, EdgeOrigin::Similarity));
        } else {
            let overlap = jaccard(&analyzer.content_token_set(&old.content), &new_tokens);
            if overlap > 0.0 && overlap >= th.keyword_edge_min {
                edges.push(edge(EdgeKind::Reference, overlap, EdgeOrigin::Keyword));
            }
        }

        if old.turn > new.turn {
            continue;
        }
        let similar = (rules.causal_pairs.contains(old.kind, new.kind) && sim >= th.theta_causal)
            .then(|| edge(EdgeKind::Causal, sim, EdgeOrigin::Similarity));
        let heuristic = (matches!(old.kind, ArtifactKind::KeyFact | ArtifactKind::Reminder)
            && new.kind == ArtifactKind::Decision
            && new.turn - old.turn <= th.temporal_window)
            .then(|| edge(EdgeKind::Causal, 1.0, EdgeOrigin::TemporalHeuristic));
        // heuristic weight 1.0 is never below a similarity weight
        if let Some(e) = heuristic.or(similar) {
            edges.push(e);
        }
    }
    Ok(edges)
}
