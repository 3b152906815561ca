//! Retrieval-only evaluation: keyword presence in the injected artifacts,
//! with no answer generation.

use serde::{Deserialize, Serialize};

use canvas_core::config::{Backends, EngineConfig};
use canvas_core::model::CanvasGraph;
use canvas_core::retrieval::{object_lines, QueryClass, RetrievalConfig, Retriever};

use crate::conditions::{build_graph, parallel_map, BenchError};
use crate::generate::{BenchmarkCase, Rendering};
use crate::metrics::keyword_coverage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallQuery {
    pub question: String,
    pub keywords: Vec<String>,
}

/// A graph and the questions asked against it.
#[derive(Debug, Clone)]
pub struct RecallFixture {
    pub graph: CanvasGraph,
    pub queries: Vec<RecallQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub hops: u32,
    pub questions: usize,
    /// Mean keyword coverage over all questions.
    pub overall: f64,
    pub simple: Option<f64>,
    pub temporal: Option<f64>,
    pub multi_hop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub rows: Vec<RecallRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Keyword recall of one query's injected artifacts.
pub fn query_recall(retriever: &Retriever<'_>, graph: &CanvasGraph, q: &RecallQuery) -> Result<(QueryClass, f64), BenchError> {
    let outcome = retriever.retrieve(graph, &q.question)?;
    let text = object_lines(&outcome.block).collect::<Vec<_>>().join("\n");
    Ok((outcome.plan.class, keyword_coverage(&text, &q.keywords)?.fraction))
}

/// One row per hops setting, in the order given.
pub fn retrieval_recall_on_fixtures(
    fixtures: &[RecallFixture],
    config: &EngineConfig,
    backends: &Backends,
    hops: &[u32],
) -> Result<RecallTable, BenchError> {
    let analyzer = config.analyzer();
    let mut rows = Vec::with_capacity(hops.len());
    for &h in hops {
        let retrieval = RetrievalConfig {
            hops: h,
            ..config.retrieval.clone()
        };
        let retriever = Retriever {
            embedder: backends.embedder.as_ref(),
            reranker: backends.reranker.as_ref(),
            counter: backends.counter.as_ref(),
            analyzer: &analyzer,
            config: &retrieval,
        };
        let (mut all, mut simple, mut temporal, mut multi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for f in fixtures {
            for q in &f.queries {
                let (class, r) = query_recall(&retriever, &f.graph, q)?;
                all.push(r);
                match class {
                    QueryClass::Simple => simple.push(r),
                    QueryClass::Temporal => temporal.push(r),
                    QueryClass::MultiHop => multi.push(r),
                }
            }
        }
        rows.push(RecallRow {
            hops: h,
            questions: all.len(),
            overall: mean(&all).unwrap_or(0.0),
            simple: mean(&simple),
            temporal: mean(&temporal),
            multi_hop: mean(&multi),
        });
    }
    Ok(RecallTable { rows })
}

/// Ingests each case's history once, then evaluates every hops setting.
pub fn retrieval_recall_eval(
    cases: &[BenchmarkCase],
    config: &EngineConfig,
    backends: &Backends,
    rendering: Rendering,
    hops: &[u32],
) -> Result<RecallTable, BenchError> {
    let fixtures = parallel_map(cases, config.bench.jobs, |c| {
        Ok(RecallFixture {
            graph: build_graph(c.history(rendering), config, backends)?,
            queries: c
                .planted
                .iter()
                .map(|f| RecallQuery {
                    question: f.question.clone(),
                    keywords: f.keywords.clone(),
                })
                .collect(),
        })
    })?;
    retrieval_recall_on_fixtures(&fixtures, config, backends, hops)
}
