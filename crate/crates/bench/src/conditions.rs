//! The five context-management conditions and their scoring.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use canvas_core::config::{Backends, EngineConfig};
use canvas_core::extraction::ConversationTurn;
use canvas_core::memory::{CanvasMemory, IngestError};
use canvas_core::model::{ArtifactKind, CanvasGraph};
use canvas_core::retrieval::{RetrievalError, Retriever};
use canvas_core::text::Analyzer;

use crate::generate::{BenchmarkCase, QuestionKind, Rendering};
use crate::metrics::{exact_match, fuzzy_match_score, is_recalled, keyword_coverage, MetricError};
use crate::rag::{ChunkIndex, RagError, RagPreset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Native,
    Truncation,
    Summarization,
    Rag,
    Canvas,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Native,
        Condition::Truncation,
        Condition::Summarization,
        Condition::Rag,
        Condition::Canvas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Native => "native",
            Condition::Truncation => "truncation",
            Condition::Summarization => "summarization",
            Condition::Rag => "rag",
            Condition::Canvas => "canvas",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown condition {0:?}")]
pub struct UnknownCondition(String);

impl FromStr for Condition {
    type Err = UnknownCondition;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownCondition(s.to_owned()))
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown RAG preset {0:?}")]
    UnknownRagPreset(String),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("ingest setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Everything a condition run needs besides the cases.
pub struct RunContext<'a> {
    pub config: &'a EngineConfig,
    pub backends: &'a Backends,
    pub rendering: Rendering,
    /// Explicit RAG preset; otherwise `config.bench.rag_preset` by name.
    pub rag: Option<RagPreset>,
}

impl RunContext<'_> {
    pub fn rag_preset(&self) -> Result<RagPreset, BenchError> {
        if let Some(p) = &self.rag {
            return Ok(p.clone());
        }
        let name = &self.config.bench.rag_preset;
        RagPreset::named(name).ok_or_else(|| BenchError::UnknownRagPreset(name.clone()))
    }

    /// Label used in tables: the RAG preset name for the RAG condition.
    pub fn label(&self, condition: Condition) -> Result<String, BenchError> {
        Ok(match condition {
            Condition::Rag => self.rag_preset()?.name,
            c => c.name().to_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub case_seed: u64,
    pub fact: usize,
    pub category: ArtifactKind,
    pub question_kind: QuestionKind,
    pub plant_turn: u32,
    pub question: String,
    pub answer_key: String,
    pub keywords: Vec<String>,
    /// None when the backend failed for this question.
    pub answer: Option<String>,
    pub fuzzy: f64,
    pub exact: bool,
    pub recalled: bool,
    pub keyword_coverage: f64,
    pub keyword_pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    pub answered: usize,
    pub recall_rate: f64,
    pub exact_rate: f64,
    pub pass_rate: f64,
    pub keyword_coverage: f64,
    pub causal_coverage: Option<f64>,
    pub impact_coverage: Option<f64>,
}

fn mean<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_records(records: &[QuestionRecord]) -> Self {
        let rate = |f: fn(&QuestionRecord) -> bool| mean(records.iter().map(|r| f64::from(u8::from(f(r))))).unwrap_or(0.0);
        let coverage_of = |kind: QuestionKind| {
            mean(records.iter().filter(|r| r.question_kind == kind).map(|r| r.keyword_coverage))
        };
        Self {
            questions: records.len(),
            answered: records.iter().filter(|r| r.answer.is_some()).count(),
            recall_rate: rate(|r| r.recalled),
            exact_rate: rate(|r| r.exact),
            pass_rate: rate(|r| r.keyword_pass),
            keyword_coverage: mean(records.iter().map(|r| r.keyword_coverage)).unwrap_or(0.0),
            causal_coverage: coverage_of(QuestionKind::Causal),
            impact_coverage: coverage_of(QuestionKind::Impact),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: String,
    pub records: Vec<QuestionRecord>,
    pub aggregates: Aggregates,
    /// Total graph edges over all cases (canvas condition only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_edges: Option<usize>,
}

/// Renders turns as a plain transcript.
pub fn render_turns(turns: &[ConversationTurn]) -> String {
    turns
        .iter()
        .map(|t| format!("Turn {}\nUser: {}\nAssistant: {}\n", t.index, t.user, t.assistant))
        .collect::<Vec<_>>()
        .join("\n")
}

fn with_recent(prefix: &str, recent: &[ConversationTurn]) -> String {
    let recent = render_turns(recent);
    match (prefix.is_empty(), recent.is_empty()) {
        (true, _) => recent,
        (_, true) => prefix.to_owned(),
        _ => format!("{prefix}\n\n{recent}"),
    }
}

/// Ingests `turns` into a fresh graph with the configured backends.
pub fn build_graph(turns: &[ConversationTurn], config: &EngineConfig, backends: &Backends) -> Result<CanvasGraph, BenchError> {
    let mut memory = CanvasMemory::new(
        backends.extractor.as_ref(),
        backends.embedder.as_ref(),
        config.linking.clone(),
        config.analyzer(),
        config.gleaning,
    )
    .map_err(|e| BenchError::Setup(e.to_string()))?;
    memory.ingest_all(turns)?;
    Ok(memory.into_graph())
}

/// Per-case state; questions are answered against it one by one.
enum Prepared {
    Fixed(String),
    Rag(ChunkIndex, usize),
    Canvas(CanvasGraph),
    Failed(String),
}

fn score(
    case: &BenchmarkCase,
    fact: usize,
    answer: Result<String, String>,
) -> Result<QuestionRecord, BenchError> {
    let f = &case.planted[fact];
    let (answer, error) = match answer {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e)),
    };
    let text = answer.as_deref().unwrap_or("");
    let (fuzzy, exact, coverage) = if answer.is_some() {
        (
            fuzzy_match_score(text, &f.answer_key),
            exact_match(text, &f.answer_key)?,
            keyword_coverage(text, &f.keywords)?,
        )
    } else {
        (0.0, false, keyword_coverage("", &f.keywords)?)
    };
    Ok(QuestionRecord {
        case_seed: case.seed,
        fact,
        category: f.category,
        question_kind: f.question_kind,
        plant_turn: f.plant_turn,
        question: f.question.clone(),
        answer_key: f.answer_key.clone(),
        keywords: f.keywords.clone(),
        answer,
        fuzzy,
        exact,
        recalled: is_recalled(fuzzy),
        keyword_coverage: coverage.fraction,
        keyword_pass: coverage.pass,
        error,
    })
}

/// Answers every planted question of one case under `condition`.
pub fn run_case(
    case: &BenchmarkCase,
    condition: Condition,
    ctx: &RunContext<'_>,
) -> Result<(Vec<QuestionRecord>, Option<usize>), BenchError> {
    let cfg = ctx.config;
    let b = ctx.backends;
    let history = case.history(ctx.rendering);
    let n_recent = cfg.bench.recent_turns.min(history.len());
    let (older, recent) = history.split_at(history.len() - n_recent);

    let prepared = match condition {
        Condition::Truncation => Prepared::Fixed(render_turns(recent)),
        Condition::Native => {
            let mut used = 0;
            let mut kept = 0;
            for t in history.iter().rev() {
                let cost = b.counter.count(&render_turns(std::slice::from_ref(t)));
                if used + cost > cfg.bench.native_context_tokens {
                    break;
                }
                used += cost;
                kept += 1;
            }
            Prepared::Fixed(render_turns(&history[history.len() - kept..]))
        }
        Condition::Summarization => match b.summarizer.summarize(older) {
            Ok(summary) => Prepared::Fixed(with_recent(&format!("Summary of earlier conversation:\n{summary}"), recent)),
            Err(e) => Prepared::Failed(e.to_string()),
        },
        Condition::Rag => {
            let preset = ctx.rag_preset()?;
            match ChunkIndex::build(&render_turns(history), &preset, b.embedder.as_ref()) {
                Ok(index) => Prepared::Rag(index, preset.top_k),
                Err(RagError::Backend(e)) => Prepared::Failed(e.to_string()),
                Err(e) => return Err(e.into()),
            }
        }
        Condition::Canvas => Prepared::Canvas(build_graph(history, cfg, b)?),
    };

    let analyzer: Analyzer = cfg.analyzer();
    let retriever = Retriever {
        embedder: b.embedder.as_ref(),
        reranker: b.reranker.as_ref(),
        counter: b.counter.as_ref(),
        analyzer: &analyzer,
        config: &cfg.retrieval,
    };

    let mut records = Vec::with_capacity(case.planted.len());
    for (i, fact) in case.planted.iter().enumerate() {
        let context = match &prepared {
            Prepared::Fixed(c) => Ok(c.clone()),
            Prepared::Failed(e) => Err(e.clone()),
            Prepared::Rag(index, k) => b
                .embedder
                .embed(&fact.question)
                .map_err(|e| e.to_string())
                .and_then(|q| index.search(&q, *k).map_err(|e| e.to_string()))
                .map(|chunks| with_recent(&chunks.join("\n...\n"), recent)),
            Prepared::Canvas(graph) => retriever
                .retrieve(graph, &fact.question)
                .map(|o| with_recent(&o.block, recent))
                .map_err(|e| e.to_string()),
        };
        let answer = context.and_then(|c| b.answerer.answer(&c, &fact.question).map_err(|e| e.to_string()));
        if let Err(e) = &answer {
            warn!(case = case.seed, question = %fact.question, error = %e, "question unanswered");
        }
        records.push(score(case, i, answer)?);
    }
    let edges = match &prepared {
        Prepared::Canvas(g) => Some(g.edge_count()),
        _ => None,
    };
    Ok((records, edges))
}

/// Maps `f` over `items` on `jobs` worker threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, BenchError> + Sync + Send,
) -> Result<Vec<R>, BenchError> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    pool.install(|| items.par_iter().map(f).collect())
}

/// Runs one condition over all cases and aggregates.
pub fn run_condition(
    cases: &[BenchmarkCase],
    condition: Condition,
    ctx: &RunContext<'_>,
) -> Result<ConditionResult, BenchError> {
    let per_case = parallel_map(cases, ctx.config.bench.jobs, |c| run_case(c, condition, ctx))?;
    let graph_edges = (condition == Condition::Canvas).then(|| per_case.iter().filter_map(|(_, e)| *e).sum());
    let records: Vec<QuestionRecord> = per_case.into_iter().flat_map(|(r, _)| r).collect();
    Ok(ConditionResult {
        condition: ctx.label(condition)?,
        aggregates: Aggregates::from_records(&records),
        records,
        graph_edges,
    })
}
