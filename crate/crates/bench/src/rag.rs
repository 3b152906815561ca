//! Naive chunked retrieval baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use canvas_core::backends::BackendError;
use canvas_core::scoring::{cosine_sim, Embedder, ScoringError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagPreset {
    pub name: String,
    /// Chunk length in characters.
    pub chunk_size: usize,
    pub top_k: usize,
    /// Characters shared by consecutive chunks.
    pub overlap: usize,
}

impl RagPreset {
    pub fn new(name: &str, chunk_size: usize, top_k: usize, overlap: usize) -> Self {
        Self {
            name: name.to_owned(),
            chunk_size,
            top_k,
            overlap,
        }
    }

    pub fn all() -> Vec<RagPreset> {
        vec![
            Self::new("rag-small", 256, 5, 50),
            Self::new("rag-default", 512, 5, 100),
            Self::new("rag-large", 1024, 5, 200),
            Self::new("rag-topk10", 512, 10, 100),
        ]
    }

    pub fn named(name: &str) -> Option<RagPreset> {
        Self::all().into_iter().find(|p| p.name == name)
    }

    pub fn validate(&self) -> Result<(), RagError> {
        if self.chunk_size == 0 || self.top_k == 0 || self.overlap >= self.chunk_size {
            return Err(RagError::InvalidPreset(self.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RagError {
    #[error("invalid RAG preset {0:?}: need chunk_size > overlap and top_k > 0")]
    InvalidPreset(RagPreset),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Fixed-size character windows. Chunk `i` starts at `i * (size - overlap)`;
/// the last chunk ends at the end of the text and may be shorter.
pub fn chunk_text(text: &str, size: usize, overlap: usize) -> Vec<String> {
    assert!(size > overlap, "chunk size must exceed overlap");
    let chars: Vec<char> = text.chars().collect();
    let stride = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = (start + size).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Embedded chunks of one transcript.
pub struct ChunkIndex {
    chunks: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl ChunkIndex {
    pub fn build(text: &str, preset: &RagPreset, embedder: &dyn Embedder) -> Result<Self, RagError> {
        preset.validate()?;
        let chunks = chunk_text(text, preset.chunk_size, preset.overlap);
        let refs: Vec<&str> = chunks.iter().map(String::as_str).collect();
        let vectors = embedder.embed_batch(&refs)?;
        Ok(Self { chunks, vectors })
    }

    pub fn chunks(&self) -> &[String] {
        &self.chunks
    }

    /// Top `k` chunks by cosine similarity; ties keep transcript order.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<&str>, RagError> {
        let mut scored = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| Ok((i, cosine_sim(query, v)?)))
            .collect::<Result<Vec<_>, ScoringError>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored.iter().take(k).map(|&(i, _)| self.chunks[i].as_str()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_tile_with_overlap() {
        let text: String = (0..1000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let chunks = chunk_text(&text, 256, 50);
        assert_eq!(chunks.len(), 5);
        assert!(chunks[..4].iter().all(|c| c.chars().count() == 256));
        assert_eq!(chunks[4].chars().count(), 1000 - 4 * 206);
        for w in chunks.windows(2) {
            assert_eq!(&w[0][206..], &w[1][..50]);
        }
    }

    #[test]
    fn short_and_empty_text() {
        assert_eq!(chunk_text("abc", 512, 100), vec!["abc"]);
        assert!(chunk_text("", 512, 100).is_empty());
    }

    #[test]
    fn presets_match_table() {
        let p = RagPreset::named("rag-default").unwrap();
        assert_eq!((p.chunk_size, p.top_k, p.overlap), (512, 5, 100));
        assert_eq!(RagPreset::all().len(), 4);
        assert!(RagPreset::new("bad", 10, 5, 10).validate().is_err());
    }
}
