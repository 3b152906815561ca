//! Result files and summary tables.
//!
//! A run file is line-delimited JSON: one `run` header echoing the resolved
//! config and seed, then one `record` line per question, then one
//! `aggregate` line per condition. Nothing time-dependent is written, so a
//! rerun with the same header reproduces the file byte for byte.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use canvas_core::config::EngineConfig;

use crate::conditions::{Aggregates, ConditionResult, QuestionRecord};
use crate::generate::{BenchmarkCase, Rendering, Variant};
use crate::recall::RecallTable;
use crate::sweep::SweepTable;

pub const RESULT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format_version: u32,
    pub seed: u64,
    pub cases: usize,
    pub variant: Variant,
    pub rendering: Rendering,
    pub conditions: Vec<String>,
    pub config: EngineConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResultLine {
    Run(RunHeader),
    Record {
        condition: String,
        #[serde(flatten)]
        record: QuestionRecord,
    },
    Aggregate {
        condition: String,
        #[serde(flatten)]
        aggregates: Aggregates,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph_edges: Option<usize>,
    },
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("result file has no run header")]
    MissingHeader,
    #[error("unsupported result format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("result line serializes") + "\n"
}

pub fn write_run(header: &RunHeader, results: &[ConditionResult]) -> String {
    let mut out = line(&ResultLine::Run(header.clone()));
    for r in results {
        for rec in &r.records {
            out += &line(&ResultLine::Record {
                condition: r.condition.clone(),
                record: rec.clone(),
            });
        }
    }
    for r in results {
        out += &line(&ResultLine::Aggregate {
            condition: r.condition.clone(),
            aggregates: r.aggregates.clone(),
            graph_edges: r.graph_edges,
        });
    }
    out
}

/// Reads the header line of a run file.
pub fn read_run_header<R: BufRead>(reader: R) -> Result<RunHeader, ReportError> {
    for (i, l) in reader.lines().enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        return match serde_json::from_str(&l).map_err(|source| ReportError::Parse { line: i + 1, source })? {
            ResultLine::Run(h) if h.format_version == RESULT_FORMAT_VERSION => Ok(h),
            ResultLine::Run(h) => Err(ReportError::Version(h.format_version)),
            _ => Err(ReportError::MissingHeader),
        };
    }
    Err(ReportError::MissingHeader)
}

/// Every result line of a run file.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<ResultLine>, ReportError> {
    reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| serde_json::from_str(&l?).map_err(|source| ReportError::Parse { line: i + 1, source }))
        .collect()
}

pub fn write_cases(cases: &[BenchmarkCase]) -> String {
    cases.iter().map(line).collect()
}

pub fn read_cases<R: BufRead>(reader: R) -> Result<Vec<BenchmarkCase>, ReportError> {
    reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| serde_json::from_str(&l?).map_err(|source| ReportError::Parse { line: i + 1, source }))
        .collect()
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), pct)
}

/// Recall and exact match (standard) next to pass rate and coverages
/// (multi-hop), one row per condition.
pub fn summary_table(results: &[ConditionResult]) -> String {
    let mut out = String::from(
        "| Condition | Questions | Recall | Exact | Pass | Keyword | Causal | Impact |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for r in results {
        let a = &r.aggregates;
        out += &format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.condition,
            a.questions,
            pct(a.recall_rate),
            pct(a.exact_rate),
            pct(a.pass_rate),
            pct(a.keyword_coverage),
            opt_pct(a.causal_coverage),
            opt_pct(a.impact_coverage),
        );
    }
    out
}

pub fn sweep_markdown(table: &SweepTable) -> String {
    let mut out = format!(
        "| {} | Params | Recall | Exact | Pass | Keyword | Edges |\n|---|---|---|---|---|---|---|\n",
        table.axis
    );
    for r in &table.rows {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out += &format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            r.label,
            params.join(" "),
            pct(r.aggregates.recall_rate),
            pct(r.aggregates.exact_rate),
            pct(r.aggregates.pass_rate),
            pct(r.aggregates.keyword_coverage),
            r.graph_edges.map_or_else(|| "-".to_owned(), |e| e.to_string()),
        );
    }
    out
}

pub fn recall_markdown(table: &RecallTable) -> String {
    let mut out = String::from("| Hops | Questions | Overall | Simple | Temporal | Multi-hop |\n|---|---|---|---|---|---|\n");
    for r in &table.rows {
        out += &format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.hops,
            r.questions,
            pct(r.overall),
            opt_pct(r.simple),
            opt_pct(r.temporal),
            opt_pct(r.multi_hop),
        );
    }
    out
}
