//! Parameter grids over the benchmark: link thresholds, RAG presets, fusion
//! weight and ablation arms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use canvas_core::config::{Backends, EngineConfig};
use canvas_core::graph_build::LinkThresholds;

use crate::conditions::{run_condition, Aggregates, BenchError, Condition, RunContext};
use crate::generate::{BenchmarkCase, Rendering};
use crate::rag::RagPreset;

/// Component removed from the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Full,
    NoReranking,
    NoGraphExpansion,
    NoGleaning,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Full, Arm::NoReranking, Arm::NoGraphExpansion, Arm::NoGleaning];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::NoReranking => "-- reranking",
            Arm::NoGraphExpansion => "-- graph expansion",
            Arm::NoGleaning => "-- gleaning",
        }
    }

    pub fn apply(self, cfg: &mut EngineConfig) {
        match self {
            Arm::Full => {}
            Arm::NoReranking => cfg.retrieval.rerank = false,
            Arm::NoGraphExpansion => cfg.retrieval.hops = 0,
            Arm::NoGleaning => cfg.gleaning = false,
        }
    }
}

/// Named (ref, causal) pairs from the sensitivity study.
pub fn threshold_presets() -> Vec<(&'static str, LinkThresholds)> {
    let pair = |theta_ref, theta_causal| LinkThresholds {
        theta_ref,
        theta_causal,
        ..LinkThresholds::default()
    };
    vec![
        ("low", pair(0.3, 0.25)),
        ("default", pair(0.5, 0.45)),
        ("high", pair(0.7, 0.6)),
        ("very-high", pair(0.8, 0.7)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Reference thresholds, causal set 0.05 below each.
    ThetaRef(Vec<f64>),
    ThresholdPresets,
    Rag(Vec<RagPreset>),
    Alpha(Vec<f64>),
    Arms(Vec<Arm>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub condition: String,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

struct Cell {
    label: String,
    params: BTreeMap<String, serde_json::Value>,
    config: EngineConfig,
    condition: Condition,
    rag: Option<RagPreset>,
}

fn threshold_cell(label: String, base: &EngineConfig, t: LinkThresholds) -> Cell {
    let mut config = base.clone();
    config.linking.thresholds = t;
    Cell {
        label,
        params: BTreeMap::from([
            ("theta_ref".to_owned(), t.theta_ref.into()),
            ("theta_causal".to_owned(), t.theta_causal.into()),
        ]),
        config,
        condition: Condition::Canvas,
        rag: None,
    }
}

fn cells(axis: &SweepAxis, base: &EngineConfig) -> (&'static str, Vec<Cell>) {
    match axis {
        SweepAxis::ThetaRef(values) => (
            "theta_ref",
            values
                .iter()
                .map(|&v| threshold_cell(format!("theta_ref={v}"), base, LinkThresholds::from_theta_ref(v)))
                .collect(),
        ),
        SweepAxis::ThresholdPresets => (
            "thresholds",
            threshold_presets()
                .into_iter()
                .map(|(name, t)| threshold_cell(name.to_owned(), base, t))
                .collect(),
        ),
        SweepAxis::Rag(presets) => (
            "rag",
            presets
                .iter()
                .map(|p| {
                    let mut config = base.clone();
                    config.bench.rag_preset.clone_from(&p.name);
                    Cell {
                        label: p.name.clone(),
                        params: BTreeMap::from([
                            ("chunk_size".to_owned(), p.chunk_size.into()),
                            ("top_k".to_owned(), p.top_k.into()),
                            ("overlap".to_owned(), p.overlap.into()),
                        ]),
                        config,
                        condition: Condition::Rag,
                        rag: Some(p.clone()),
                    }
                })
                .collect(),
        ),
        SweepAxis::Alpha(values) => (
            "alpha",
            values
                .iter()
                .map(|&a| {
                    let mut config = base.clone();
                    config.retrieval.weights.alpha = a;
                    Cell {
                        label: format!("alpha={a}"),
                        params: BTreeMap::from([("alpha".to_owned(), a.into())]),
                        config,
                        condition: Condition::Canvas,
                        rag: None,
                    }
                })
                .collect(),
        ),
        SweepAxis::Arms(arms) => (
            "arms",
            arms.iter()
                .map(|&arm| {
                    let mut config = base.clone();
                    arm.apply(&mut config);
                    Cell {
                        label: arm.label().to_owned(),
                        params: BTreeMap::from([("arm".to_owned(), serde_json::to_value(arm).expect("arm serializes"))]),
                        config,
                        condition: Condition::Canvas,
                        rag: None,
                    }
                })
                .collect(),
        ),
    }
}

/// Runs every grid cell over `cases`; one row per cell, grid order.
pub fn run_sweep(
    cases: &[BenchmarkCase],
    axis: &SweepAxis,
    base: &EngineConfig,
    backends: &Backends,
    rendering: Rendering,
) -> Result<SweepTable, BenchError> {
    let (name, cells) = cells(axis, base);
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        cell.config
            .clone()
            .resolve()
            .map_err(|e| BenchError::Setup(format!("{}: {e}", cell.label)))?;
        let ctx = RunContext {
            config: &cell.config,
            backends,
            rendering,
            rag: cell.rag,
        };
        let result = run_condition(cases, cell.condition, &ctx)?;
        rows.push(SweepRow {
            label: cell.label,
            params: cell.params,
            condition: result.condition,
            aggregates: result.aggregates,
            graph_edges: result.graph_edges,
        });
    }
    Ok(SweepTable { axis: name.to_owned(), rows })
}
