//! Tokenization, normalization and the stopword list shared by scoring,
//! linking and quote validation.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

/// Default English stopword list (50 words), one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

/// Lowercases and collapses every whitespace run to a single space.
pub fn normalize_whitespace_lower(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Case-insensitive, whitespace-normalized substring test.
pub fn contains_normalized(haystack: &str, needle: &str) -> bool {
    let needle = normalize_whitespace_lower(needle);
    if needle.is_empty() {
        return false;
    }
    normalize_whitespace_lower(haystack).contains(&needle)
}

/// Lowercase word tokens: maximal runs of alphanumeric characters.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn parse(list: &str) -> Self {
        let words = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

/// Splits text into stopword-stripped content tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analyzer {
    stopwords: Stopwords,
}

impl Analyzer {
    pub fn new(stopwords: Stopwords) -> Self {
        Self { stopwords }
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        word_tokens(text)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    pub fn content_token_set(&self, text: &str) -> BTreeSet<String> {
        self.content_tokens(text).into_iter().collect()
    }
}

/// |A ∩ B| / |A ∪ B|; zero when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
