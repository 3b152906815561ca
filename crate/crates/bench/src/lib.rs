//! Planted-fact benchmark for the canvas memory engine: case generation,
//! the five context-management conditions, metrics, sweeps and
//! retrieval-only recall.

pub mod conditions;
pub mod generate;
pub mod metrics;
pub mod rag;
pub mod recall;
pub mod report;
pub mod sweep;

pub use conditions::{run_condition, Condition, ConditionResult, RunContext};
pub use generate::{generate_case, generate_cases, BenchmarkCase, PlantedFact, Rendering, Variant};
