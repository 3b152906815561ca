/// Estimates how many model tokens a string costs.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(chars / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharRatioCounter;

impl TokenCounter for CharRatioCounter {
    fn count(&self, text: &str) -> usize {
        text.chars().count().div_ceil(4)
    }
}

/// Walks `costs` in order and keeps every item that still fits in the
/// remaining budget. An item that overflows is skipped, not a stopping
/// point. Returns the kept indices.
pub fn greedy_select(costs: &[usize], budget: usize) -> Vec<usize> {
    let mut remaining = budget;
    let mut kept = Vec::new();
    for (i, &c) in costs.iter().enumerate() {
        if c <= remaining {
            remaining -= c;
            kept.push(i);
        }
    }
    kept
}
