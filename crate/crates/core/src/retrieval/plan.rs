use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::word_tokens;

pub const DEFAULT_CAUSAL_INDICATORS: &str = include_str!("../../assets/indicators_causal.txt");
pub const DEFAULT_TEMPORAL_INDICATORS: &str = include_str!("../../assets/indicators_temporal.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QueryClass {
    Simple,
    Temporal,
    MultiHop,
}

/// Candidate count per query class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveK {
    pub simple: usize,
    pub temporal: usize,
    pub multi_hop: usize,
}

impl Default for AdaptiveK {
    fn default() -> Self {
        Self {
            simple: 10,
            temporal: 12,
            multi_hop: 15,
        }
    }
}

impl AdaptiveK {
    pub fn for_class(&self, class: QueryClass) -> usize {
        match class {
            QueryClass::Simple => self.simple,
            QueryClass::Temporal => self.temporal,
            QueryClass::MultiHop => self.multi_hop,
        }
    }
}

/// Phrase lists that mark a query as causal (multi-hop) or temporal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicators {
    pub causal: Vec<String>,
    pub temporal: Vec<String>,
}

/// Non-empty, non-comment lines, lowercased.
pub fn phrase_list(src: &str) -> Vec<String> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Default for Indicators {
    fn default() -> Self {
        Self {
            causal: phrase_list(DEFAULT_CAUSAL_INDICATORS),
            temporal: phrase_list(DEFAULT_TEMPORAL_INDICATORS),
        }
    }
}

impl Indicators {
    pub fn load(causal: &Path, temporal: &Path) -> std::io::Result<Self> {
        Ok(Self {
            causal: phrase_list(&std::fs::read_to_string(causal)?),
            temporal: phrase_list(&std::fs::read_to_string(temporal)?),
        })
    }
}

/// Whole-word phrase match: the phrase's tokens appear contiguously.
fn has_phrase(tokens: &[String], phrase: &str) -> bool {
    let needle = word_tokens(phrase);
    !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Classifies a query; causal indicators win over temporal ones.
pub fn classify_query(query: &str, indicators: &Indicators, k: &AdaptiveK) -> (QueryClass, usize) {
    let tokens = word_tokens(query);
    let class = if indicators.causal.iter().any(|p| has_phrase(&tokens, p)) {
        QueryClass::MultiHop
    } else if indicators.temporal.iter().any(|p| has_phrase(&tokens, p)) {
        QueryClass::Temporal
    } else {
        QueryClass::Simple
    };
    (class, k.for_class(class))
}

/// A classified query with its retrieval parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub query_text: String,
    pub query_embedding: Vec<f64>,
    pub class: QueryClass,
    pub k: usize,
    pub coarse_k: usize,
    pub hops: u32,
    pub budget_tokens: usize,
}
