//! Query-time pipeline: classify, hybrid coarse retrieval, graph expansion,
//! reranking to the adaptive k, budgeted greedy packing and injection.

mod budget;
mod inject;
mod plan;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

pub use budget::{greedy_select, CharRatioCounter, TokenCounter};
pub use inject::{
    build_injection, object_lines, render_object_line, INJECTION_FORMAT_VERSION, INJECTION_HEADER,
    KIND_ORDER, REASONING_INSTRUCTION, TEMPORAL_INSTRUCTION,
};
pub use plan::{classify_query, phrase_list, AdaptiveK, Indicators, QueryClass, QueryPlan};

use crate::backends::BackendError;
use crate::model::{CanvasGraph, CanvasObject, ObjectId};
use crate::scoring::{hybrid_score, Embedder, HybridWeights, ScoringError};
use crate::text::Analyzer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub preset: String,
    pub weights: HybridWeights,
    pub k: AdaptiveK,
    pub coarse_k: usize,
    pub hops: u32,
    pub budget_tokens: usize,
    pub expansion_decay: f64,
    /// When false the reranker is bypassed and candidates keep hybrid order.
    pub rerank: bool,
    pub indicators: Indicators,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            preset: "standard".to_owned(),
            weights: HybridWeights::default(),
            k: AdaptiveK::default(),
            coarse_k: 20,
            hops: 1,
            budget_tokens: 2000,
            expansion_decay: 0.8,
            rerank: true,
            indicators: Indicators::default(),
        }
    }
}

impl RetrievalConfig {
    pub const PRESETS: [&'static str; 2] = ["standard", "locomo"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "standard" => Some(Self::default()),
            "locomo" => Some(Self {
                preset: "locomo".to_owned(),
                hops: 4,
                ..Self::default()
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        self.weights.validate()?;
        let invalid = |m: &str| Err(RetrievalError::InvalidConfig(m.to_owned()));
        if self.budget_tokens == 0 {
            return invalid("budget_tokens must be positive");
        }
        if self.coarse_k == 0 || self.k.simple == 0 || self.k.temporal == 0 || self.k.multi_hop == 0 {
            return invalid("k values must be positive");
        }
        if !(0.0..=1.0).contains(&self.expansion_decay) {
            return invalid("expansion_decay outside [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "via", rename_all = "snake_case")]
pub enum Provenance {
    Coarse,
    Expanded { hops: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredObject {
    pub id: ObjectId,
    pub hybrid: f64,
    pub rerank: Option<f64>,
    pub provenance: Provenance,
}

impl ScoredObject {
    pub fn coarse(id: ObjectId, hybrid: f64) -> Self {
        Self {
            id,
            hybrid,
            rerank: None,
            provenance: Provenance::Coarse,
        }
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("no candidates to rerank")]
    EmptyCandidates,
    #[error("candidate {0} is not in the graph")]
    UnknownCandidate(ObjectId),
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Orders by score desc, then confidence desc, turn asc, id asc.
fn rank_order(a: (&CanvasObject, f64), b: (&CanvasObject, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(b.0.confidence.total_cmp(&a.0.confidence))
        .then(a.0.turn.cmp(&b.0.turn))
        .then_with(|| a.0.id.cmp(&b.0.id))
}

/// Scores every object with the hybrid scorer and keeps the best `coarse_k`.
pub fn coarse_retrieve(
    graph: &CanvasGraph,
    plan: &QueryPlan,
    analyzer: &Analyzer,
    weights: HybridWeights,
) -> Result<Vec<ScoredObject>, RetrievalError> {
    let mut scored = graph
        .objects()
        .map(|o| Ok((o, hybrid_score(analyzer, &plan.query_embedding, &plan.query_text, o, weights)?)))
        .collect::<Result<Vec<_>, ScoringError>>()?;
    scored.sort_by(|a, b| rank_order(*a, *b));
    scored.truncate(plan.coarse_k);
    Ok(scored
        .into_iter()
        .map(|(o, s)| ScoredObject::coarse(o.id.clone(), s))
        .collect())
}

/// Breadth-first expansion over all edges, both directions, up to `hops`.
///
/// Newly reached objects are appended after the seeds, level by level, with
/// score `seed score * decay^distance` (best seed at the minimal distance).
pub fn expand_graph(graph: &CanvasGraph, seeds: Vec<ScoredObject>, hops: u32, decay: f64) -> Vec<ScoredObject> {
    let mut visited: HashSet<ObjectId> = seeds.iter().map(|s| s.id.clone()).collect();
    let mut frontier: Vec<(ObjectId, f64)> = seeds.iter().map(|s| (s.id.clone(), s.hybrid)).collect();
    let mut out = seeds;
    for distance in 1..=hops {
        let mut reached: IndexMap<ObjectId, f64> = IndexMap::new();
        for (id, score) in &frontier {
            for n in graph.neighbors(id) {
                if visited.contains(n) {
                    continue;
                }
                let s = score * decay;
                reached
                    .entry(n.clone())
                    .and_modify(|best| *best = best.max(s))
                    .or_insert(s);
            }
        }
        if reached.is_empty() {
            break;
        }
        let mut level: Vec<(ObjectId, f64)> = reached.into_iter().collect();
        level.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (id, s) in &level {
            visited.insert(id.clone());
            out.push(ScoredObject {
                id: id.clone(),
                hybrid: *s,
                rerank: None,
                provenance: Provenance::Expanded { hops: distance },
            });
        }
        frontier = level;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankCandidate {
    pub id: ObjectId,
    pub text: String,
    pub hybrid: f64,
}

/// Cross-encoder style relevance scoring. Output ids must be a subset of the
/// input ids; any real scale, higher is more relevant.
pub trait Reranker: Send + Sync {
    fn rerank(&self, query: &str, candidates: &[RerankCandidate]) -> Result<Vec<(ObjectId, f64)>, BackendError>;
}

/// Scores each candidate with its own hybrid score.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassthroughReranker;

impl Reranker for PassthroughReranker {
    fn rerank(&self, _query: &str, candidates: &[RerankCandidate]) -> Result<Vec<(ObjectId, f64)>, BackendError> {
        Ok(candidates.iter().map(|c| (c.id.clone(), c.hybrid)).collect())
    }
}

pub fn rerank_text(obj: &CanvasObject) -> String {
    if obj.content == obj.quote {
        obj.content.clone()
    } else {
        format!("{} | {}", obj.content, obj.quote)
    }
}

fn usable_scores(
    scores: Vec<(ObjectId, f64)>,
    candidates: &[ScoredObject],
) -> Result<HashMap<ObjectId, f64>, String> {
    let known: HashSet<&ObjectId> = candidates.iter().map(|c| &c.id).collect();
    let mut map = HashMap::with_capacity(scores.len());
    for (id, s) in scores {
        if !known.contains(&id) {
            return Err(format!("unknown id {id}"));
        }
        if !s.is_finite() {
            return Err(format!("non-finite score for {id}"));
        }
        if map.insert(id.clone(), s).is_some() {
            return Err(format!("duplicate id {id}"));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    pub candidates: Vec<ScoredObject>,
    /// True when the backend failed and hybrid order was used instead.
    pub fell_back: bool,
}

/// Attaches backend scores, sorts by them (stable on prior order) and keeps
/// the top `k`. Candidates the backend left unscored go last in prior order.
pub fn rerank_candidates(
    backend: &dyn Reranker,
    graph: &CanvasGraph,
    query: &str,
    candidates: Vec<ScoredObject>,
    k: usize,
) -> Result<Reranked, RetrievalError> {
    if candidates.is_empty() {
        return Err(RetrievalError::EmptyCandidates);
    }
    let inputs = candidates
        .iter()
        .map(|c| {
            let obj = graph.get(&c.id).ok_or_else(|| RetrievalError::UnknownCandidate(c.id.clone()))?;
            Ok(RerankCandidate {
                id: c.id.clone(),
                text: rerank_text(obj),
                hybrid: c.hybrid,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;

    let (scores, fell_back) = match backend
        .rerank(query, &inputs)
        .map_err(|e| e.to_string())
        .and_then(|s| usable_scores(s, &candidates))
    {
        Ok(map) => (map, false),
        Err(reason) => {
            warn!(%reason, "reranker failed; falling back to hybrid order");
            let passthrough = PassthroughReranker.rerank(query, &inputs)?;
            (passthrough.into_iter().collect(), true)
        }
    };

    let mut out: Vec<ScoredObject> = candidates
        .into_iter()
        .map(|mut c| {
            c.rerank = scores.get(&c.id).copied();
            c
        })
        .collect();
    out.sort_by(|a, b| match (a.rerank, b.rerank) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    out.truncate(k);
    Ok(Reranked { candidates: out, fell_back })
}

/// Stable sort by hybrid score, truncated to `k`; the no-reranking path.
pub fn hybrid_order(mut candidates: Vec<ScoredObject>, k: usize) -> Vec<ScoredObject> {
    candidates.sort_by(|a, b| b.hybrid.total_cmp(&a.hybrid));
    candidates.truncate(k);
    candidates
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalOutcome {
    pub plan: QueryPlan,
    /// Reranked candidate set (at most k), before budget packing.
    pub candidates: Vec<ScoredObject>,
    /// Objects packed into the injection, in final score order.
    pub selected: Vec<ScoredObject>,
    pub block: String,
    pub injected_tokens: usize,
    pub rerank_fell_back: bool,
}

/// End-to-end retrieval against one graph snapshot.
pub struct Retriever<'a> {
    pub embedder: &'a dyn Embedder,
    pub reranker: &'a dyn Reranker,
    pub counter: &'a dyn TokenCounter,
    pub analyzer: &'a Analyzer,
    pub config: &'a RetrievalConfig,
}

impl Retriever<'_> {
    pub fn plan(&self, query: &str) -> Result<QueryPlan, RetrievalError> {
        if query.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        let (class, k) = classify_query(query, &self.config.indicators, &self.config.k);
        Ok(QueryPlan {
            query_text: query.to_owned(),
            query_embedding: self.embedder.embed(query)?,
            class,
            k,
            coarse_k: self.config.coarse_k,
            hops: self.config.hops,
            budget_tokens: self.config.budget_tokens,
        })
    }

    pub fn retrieve(&self, graph: &CanvasGraph, query: &str) -> Result<RetrievalOutcome, RetrievalError> {
        self.config.validate()?;
        let plan = self.plan(query)?;
        let coarse = coarse_retrieve(graph, &plan, self.analyzer, self.config.weights)?;
        let (candidates, fell_back) = if coarse.is_empty() {
            (Vec::new(), false)
        } else {
            let expanded = expand_graph(graph, coarse, plan.hops, self.config.expansion_decay);
            if self.config.rerank {
                let r = rerank_candidates(self.reranker, graph, query, expanded, plan.k)?;
                (r.candidates, r.fell_back)
            } else {
                (hybrid_order(expanded, plan.k), false)
            }
        };

        let lines: Vec<String> = candidates
            .iter()
            .map(|c| render_object_line(graph.get(&c.id).expect("candidate ids come from the graph")))
            .collect();
        let costs: Vec<usize> = lines.iter().map(|l| self.counter.count(l)).collect();
        let kept = greedy_select(&costs, plan.budget_tokens);
        let injected_tokens = kept.iter().map(|&i| costs[i]).sum();
        let selected: Vec<ScoredObject> = kept.iter().map(|&i| candidates[i].clone()).collect();
        let objects: Vec<&CanvasObject> = selected.iter().filter_map(|s| graph.get(&s.id)).collect();
        let block = build_injection(&objects, plan.class);

        Ok(RetrievalOutcome {
            plan,
            candidates,
            selected,
            block,
            injected_tokens,
            rerank_fell_back: fell_back,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendErrorKind, Role};
    use crate::model::{ArtifactKind, CanvasEdge, EdgeKind, EdgeOrigin, Source};

    fn obj(content: &str, turn: u32, confidence: f64, emb: Vec<f64>) -> CanvasObject {
        CanvasObject::new(ArtifactKind::KeyFact, content, content, Source::User, turn, confidence).with_embedding(emb)
    }

    fn plan_for(emb: Vec<f64>, coarse_k: usize) -> QueryPlan {
        QueryPlan {
            query_text: "zzz".into(),
            query_embedding: emb,
            class: QueryClass::Simple,
            k: 10,
            coarse_k,
            hops: 1,
            budget_tokens: 2000,
        }
    }

    fn weights_semantic() -> HybridWeights {
        HybridWeights { alpha: 1.0 }
    }

    #[test]
    fn coarse_returns_whole_small_pool_sorted() {
        let mut g = CanvasGraph::new();
        for (i, deg) in [80.0f64, 10.0, 45.0, 0.0, 60.0].iter().enumerate() {
            let r = deg.to_radians();
            g.add_object(obj(&format!("o{i}"), i as u32, 1.0, vec![r.cos(), r.sin()])).unwrap();
        }
        let out = coarse_retrieve(&g, &plan_for(vec![1.0, 0.0], 20), &Analyzer::default(), weights_semantic()).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.windows(2).all(|w| w[0].hybrid >= w[1].hybrid));
        assert_eq!(g.get(&out[0].id).unwrap().content, "o3");
    }

    #[test]
    fn coarse_ties_prefer_higher_confidence_then_earlier_turn() {
        let mut g = CanvasGraph::new();
        let low = obj("low", 0, 0.4, vec![1.0, 1.0]);
        let high = obj("high", 5, 0.9, vec![2.0, 2.0]);
        let early = obj("early", 1, 0.9, vec![3.0, 3.0]);
        let ids = [low.id.clone(), high.id.clone(), early.id.clone()];
        for o in [low, high, early] {
            g.add_object(o).unwrap();
        }
        let out = coarse_retrieve(&g, &plan_for(vec![1.0, 1.0], 20), &Analyzer::default(), weights_semantic()).unwrap();
        let order: Vec<_> = out.iter().map(|s| s.id.clone()).collect();
        assert_eq!(order, vec![ids[2].clone(), ids[1].clone(), ids[0].clone()]);
        let top1 = coarse_retrieve(&g, &plan_for(vec![1.0, 1.0], 1), &Analyzer::default(), weights_semantic()).unwrap();
        assert_eq!(top1.len(), 1);
    }

    #[test]
    fn coarse_on_empty_graph_is_empty() {
        let out = coarse_retrieve(&CanvasGraph::new(), &plan_for(vec![1.0], 20), &Analyzer::default(), weights_semantic()).unwrap();
        assert!(out.is_empty());
    }

    fn chain() -> (CanvasGraph, Vec<ObjectId>) {
        let mut g = CanvasGraph::new();
        let objs: Vec<_> = ["a", "b", "c"].iter().enumerate().map(|(i, n)| obj(n, i as u32, 1.0, vec![1.0])).collect();
        let ids: Vec<_> = objs.iter().map(|o| o.id.clone()).collect();
        for o in objs {
            g.add_object(o).unwrap();
        }
        for w in ids.windows(2) {
            g.add_edge(CanvasEdge {
                src: w[0].clone(),
                dst: w[1].clone(),
                kind: EdgeKind::Reference,
                weight: 0.9,
                origin: EdgeOrigin::Similarity,
            })
            .unwrap();
        }
        (g, ids)
    }

    #[test]
    fn zero_hops_is_identity() {
        let (g, ids) = chain();
        let seeds = vec![ScoredObject::coarse(ids[0].clone(), 0.5)];
        assert_eq!(expand_graph(&g, seeds.clone(), 0, 0.8), seeds);
    }

    #[test]
    fn one_hop_decays_score_and_respects_bound() {
        let (g, ids) = chain();
        let out = expand_graph(&g, vec![ScoredObject::coarse(ids[0].clone(), 0.5)], 1, 0.8);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].id, ids[1]);
        assert!((out[1].hybrid - 0.4).abs() < 1e-12);
        assert_eq!(out[1].provenance, Provenance::Expanded { hops: 1 });
        let two = expand_graph(&g, vec![ScoredObject::coarse(ids[0].clone(), 0.5)], 2, 0.8);
        assert_eq!(two.len(), 3);
        assert!((two[2].hybrid - 0.32).abs() < 1e-12);
    }

    #[test]
    fn expansion_walks_edges_backward_and_skips_seeds() {
        let (g, ids) = chain();
        let seeds = vec![ScoredObject::coarse(ids[2].clone(), 1.0), ScoredObject::coarse(ids[1].clone(), 0.9)];
        let out = expand_graph(&g, seeds, 1, 0.8);
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].id, ids[0]);
        assert!((out[2].hybrid - 0.72).abs() < 1e-12);
    }

    struct Reverse;
    impl Reranker for Reverse {
        fn rerank(&self, _: &str, c: &[RerankCandidate]) -> Result<Vec<(ObjectId, f64)>, BackendError> {
            Ok(c.iter().map(|c| (c.id.clone(), -c.hybrid)).collect())
        }
    }

    struct Failing;
    impl Reranker for Failing {
        fn rerank(&self, _: &str, _: &[RerankCandidate]) -> Result<Vec<(ObjectId, f64)>, BackendError> {
            Err(BackendError::new(Role::Reranker, BackendErrorKind::Timeout))
        }
    }

    fn three() -> (CanvasGraph, Vec<ScoredObject>) {
        let (g, ids) = chain();
        let c = ids.iter().zip([0.9, 0.6, 0.3]).map(|(id, s)| ScoredObject::coarse(id.clone(), s)).collect();
        (g, c)
    }

    #[test]
    fn passthrough_keeps_hybrid_order_and_truncates() {
        let (g, c) = three();
        let r = rerank_candidates(&PassthroughReranker, &g, "q", c.clone(), 2).unwrap();
        let ids: Vec<_> = r.candidates.iter().map(|s| &s.id).collect();
        assert_eq!(ids, vec![&c[0].id, &c[1].id]);
        assert!(!r.fell_back);
    }

    #[test]
    fn reversing_backend_reverses() {
        let (g, c) = three();
        let r = rerank_candidates(&Reverse, &g, "q", c.clone(), 10).unwrap();
        let ids: Vec<_> = r.candidates.iter().map(|s| &s.id).collect();
        assert_eq!(ids, vec![&c[2].id, &c[1].id, &c[0].id]);
    }

    #[test]
    fn failing_backend_falls_back_to_hybrid_order() {
        let (g, c) = three();
        let r = rerank_candidates(&Failing, &g, "q", c.clone(), 10).unwrap();
        assert!(r.fell_back);
        assert_eq!(r.candidates.iter().map(|s| s.id.clone()).collect::<Vec<_>>(), c.iter().map(|s| s.id.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn empty_candidates_rejected() {
        let (g, _) = three();
        assert!(matches!(
            rerank_candidates(&PassthroughReranker, &g, "q", vec![], 5),
            Err(RetrievalError::EmptyCandidates)
        ));
    }

    #[test]
    fn presets() {
        let std = RetrievalConfig::preset("standard").unwrap();
        assert_eq!((std.coarse_k, std.hops, std.budget_tokens), (20, 1, 2000));
        let locomo = RetrievalConfig::preset("locomo").unwrap();
        assert_eq!((locomo.coarse_k, locomo.hops), (20, 4));
        assert!(RetrievalConfig::preset("nope").is_none());
    }
}
