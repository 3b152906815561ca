//! Answer scoring: verbatim containment, windowed token-LCS similarity and
//! keyword coverage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use canvas_core::text::{contains_normalized, normalize_whitespace_lower, word_tokens};

/// Fuzzy score at or above which a fact counts as recalled.
pub const RECALL_THRESHOLD: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("answer key is empty")]
    EmptyKey,
    #[error("keyword list is empty")]
    EmptyKeywords,
}

/// Case-insensitive, whitespace-normalized containment of `key` in `answer`.
pub fn exact_match(answer: &str, key: &str) -> Result<bool, MetricError> {
    if key.trim().is_empty() {
        return Err(MetricError::EmptyKey);
    }
    Ok(contains_normalized(answer, key))
}

/// Similarity in [0, 100] between `answer` and `key`.
///
/// Over every contiguous answer window `w` of 1..=|key| tokens the score is
/// `2 * LCS(w, key) / (|w| + |key|)`; the best window wins. A verbatim
/// occurrence of the key scores 100.
pub fn fuzzy_match_score(answer: &str, key: &str) -> f64 {
    if contains_normalized(answer, key) {
        return 100.0;
    }
    let a = word_tokens(answer);
    let k = word_tokens(key);
    if a.is_empty() || k.is_empty() {
        return 0.0;
    }
    let mut best = 0.0f64;
    // For each start, grow the window one token at a time; `row` holds the
    // LCS of the window against every prefix of the key.
    let mut prev = vec![0usize; k.len() + 1];
    let mut row = vec![0usize; k.len() + 1];
    for start in 0..a.len() {
        prev.iter_mut().for_each(|v| *v = 0);
        for (len, tok) in a[start..].iter().take(k.len()).enumerate() {
            for j in 1..=k.len() {
                row[j] = if *tok == k[j - 1] {
                    prev[j - 1] + 1
                } else {
                    row[j - 1].max(prev[j])
                };
            }
            let lcs = row[k.len()];
            best = best.max(2.0 * lcs as f64 / (len + 1 + k.len()) as f64);
            std::mem::swap(&mut prev, &mut row);
        }
    }
    100.0 * best
}

pub fn is_recalled(fuzzy: f64) -> bool {
    fuzzy >= RECALL_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
    pub fraction: f64,
    /// At least 80% of keywords present (inclusive).
    pub pass: bool,
}

/// Fraction of `keywords` found in `answer` as case-insensitive substrings.
pub fn keyword_coverage(answer: &str, keywords: &[String]) -> Result<Coverage, MetricError> {
    if keywords.is_empty() {
        return Err(MetricError::EmptyKeywords);
    }
    let hay = normalize_whitespace_lower(answer);
    let covered = keywords
        .iter()
        .filter(|k| {
            let k = normalize_whitespace_lower(k);
            !k.is_empty() && hay.contains(&k)
        })
        .count();
    let total = keywords.len();
    Ok(Coverage {
        covered,
        total,
        fraction: covered as f64 / total as f64,
        pass: covered * 5 >= total * 4,
    })
}
