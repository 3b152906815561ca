//! Similarity scoring: embedders, cosine similarity, lexical keyword overlap
//! and the fused hybrid score used for coarse retrieval.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{BackendError, Role};
use crate::model::CanvasObject;
use crate::text::{word_tokens, Analyzer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("object {0} has no embedding")]
    MissingEmbedding(String),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
}

/// Sentence encoder producing fixed-dimension vectors.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    /// Batched embedding; output order matches input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, BackendError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Feature-hashed bag of words, L2-normalized.
///
/// Content tokens (stopwords removed) are hashed into `dim` buckets. Text
/// made only of stopwords falls back to all tokens, and text with no tokens
/// at all maps to the first basis vector so the result is never zero.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    analyzer: Analyzer,
}

impl HashingEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize, analyzer: Analyzer) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, analyzer }
    }

    fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(word) % self.dim as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM, Analyzer::default())
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let mut tokens = self.analyzer.content_tokens(text);
        if tokens.is_empty() {
            tokens = word_tokens(text);
        }
        let mut v = vec![0.0; self.dim];
        if tokens.is_empty() {
            v[0] = 1.0;
            return Ok(v);
        }
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Checks that every vector of a batch shares the backend's dimension.
pub fn check_dimensions(role: Role, dim: usize, vectors: &[Vec<f64>]) -> Result<(), BackendError> {
    match vectors.iter().find(|v| v.len() != dim) {
        Some(v) => Err(BackendError::new(
            role,
            crate::backends::BackendErrorKind::MalformedResponse(format!(
                "vector of dimension {} where {dim} expected",
                v.len()
            )),
        )),
        None => Ok(()),
    }
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, ScoringError> {
    if a.len() != b.len() {
        return Err(ScoringError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ScoringError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Fraction of the query's content tokens found in the object's content and
/// quote. Zero when the query has no content tokens.
pub fn keyword_score(analyzer: &Analyzer, query: &str, obj: &CanvasObject) -> f64 {
    let q = analyzer.content_token_set(query);
    if q.is_empty() {
        return 0.0;
    }
    let mut o = analyzer.content_token_set(&obj.content);
    o.extend(analyzer.content_tokens(&obj.quote));
    q.intersection(&o).count() as f64 / q.len() as f64
}

/// Semantic weight `alpha`; the lexical weight is `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub alpha: f64,
}

impl HybridWeights {
    pub fn new(alpha: f64) -> Result<Self, ScoringError> {
        let w = Self { alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        if (0.0..=1.0).contains(&self.alpha) {
            Ok(())
        } else {
            Err(ScoringError::InvalidAlpha(self.alpha))
        }
    }
}

impl Default for HybridWeights {
    fn default() -> Self {
        Self { alpha: 0.7 }
    }
}

/// Combines the two fusion inputs; negative cosine is clamped to zero.
pub fn fuse(weights: HybridWeights, cosine: f64, keyword: f64) -> f64 {
    weights.alpha * cosine.max(0.0) + (1.0 - weights.alpha) * keyword
}

pub fn hybrid_score(
    analyzer: &Analyzer,
    query_embedding: &[f64],
    query_text: &str,
    obj: &CanvasObject,
    weights: HybridWeights,
) -> Result<f64, ScoringError> {
    let embedding = obj
        .embedding
        .as_deref()
        .ok_or_else(|| ScoringError::MissingEmbedding(obj.id.to_string()))?;
    let cos = cosine_sim(query_embedding, embedding)?;
    Ok(fuse(weights, cos, keyword_score(analyzer, query_text, obj)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArtifactKind, Source};
    use proptest::prelude::*;

    fn obj(content: &str) -> CanvasObject {
        CanvasObject::new(ArtifactKind::Reminder, content, content, Source::User, 0, 1.0)
    }

    #[test]
    fn cosine_identity_orthogonal_and_diagonal() {
        let a = [0.3, -1.2, 4.0];
        assert!((cosine_sim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let d = cosine_sim(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((d - 0.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine_sim(&[1.0], &[1.0, 2.0]), Err(ScoringError::DimensionMismatch(1, 2)));
        assert_eq!(cosine_sim(&[0.0, 0.0], &[1.0, 2.0]), Err(ScoringError::ZeroVector));
    }

    #[test]
    fn keyword_score_examples() {
        let an = Analyzer::default();
        assert_eq!(keyword_score(&an, "type hints everywhere", &obj("please use type hints everywhere")), 1.0);
        assert_eq!(keyword_score(&an, "redis cache", &obj("deploy on friday")), 0.0);
        assert_eq!(keyword_score(&an, "the of a", &obj("the of a")), 0.0);
    }

    #[test]
    fn hybrid_degenerate_weights_and_arithmetic() {
        assert_eq!(fuse(HybridWeights { alpha: 1.0 }, 0.42, 0.9), 0.42);
        assert_eq!(fuse(HybridWeights { alpha: 0.0 }, 0.42, 0.9), 0.9);
        assert!((fuse(HybridWeights { alpha: 0.7 }, 0.5, 1.0) - 0.65).abs() < 1e-12);
        assert_eq!(fuse(HybridWeights { alpha: 1.0 }, -0.3, 0.0), 0.0);
        assert!(HybridWeights::new(1.2).is_err());
    }

    #[test]
    fn hybrid_score_uses_stored_embedding() {
        let an = Analyzer::default();
        let emb = HashingEmbedder::default();
        let o = obj("please use type hints everywhere");
        assert!(matches!(
            hybrid_score(&an, &[1.0; 256], "x", &o, HybridWeights::default()),
            Err(ScoringError::MissingEmbedding(_))
        ));
        let o = o.clone().with_embedding(emb.embed(&o.content).unwrap());
        let q = "type hints everywhere";
        let qe = emb.embed(q).unwrap();
        let alpha_one = hybrid_score(&an, &qe, q, &o, HybridWeights { alpha: 1.0 }).unwrap();
        let cos = cosine_sim(&qe, o.embedding.as_ref().unwrap()).unwrap();
        assert_eq!(alpha_one, cos.max(0.0));
        let alpha_zero = hybrid_score(&an, &qe, q, &o, HybridWeights { alpha: 0.0 }).unwrap();
        assert_eq!(alpha_zero, keyword_score(&an, q, &o));
    }

    #[test]
    fn hashing_embedder_is_pure_normalized_and_never_zero() {
        let e = HashingEmbedder::default();
        let a = e.embed("Use Redis for caching").unwrap();
        assert_eq!(a, e.embed("use redis  for CACHING").unwrap());
        assert_eq!(a.len(), 256);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        for text in ["", "the of a", "!!!"] {
            let v = e.embed(text).unwrap();
            assert!(v.iter().any(|x| *x != 0.0));
        }
        let batch = e.embed_batch(&["a b", "redis"]).unwrap();
        assert_eq!(batch[1], e.embed("redis").unwrap());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 1..16),
            seed in prop::collection::vec(-10.0f64..10.0, 16),
            lambda in 0.01f64..100.0,
            mu in 0.01f64..100.0,
        ) {
            let b: Vec<f64> = seed[..a.len()].to_vec();
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let s = cosine_sim(&a, &b).unwrap();
            prop_assert!((s - cosine_sim(&b, &a).unwrap()).abs() < 1e-12);
            let la: Vec<f64> = a.iter().map(|x| x * lambda).collect();
            let mb: Vec<f64> = b.iter().map(|x| x * mu).collect();
            prop_assert!((s - cosine_sim(&la, &mb).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn hybrid_stays_in_unit_interval(
            alpha in 0.0f64..=1.0,
            cos in -1.0f64..=1.0,
            kw in 0.0f64..=1.0,
        ) {
            let h = fuse(HybridWeights { alpha }, cos, kw);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
        }

        #[test]
        fn keyword_score_ignores_query_order(words in prop::collection::vec("[a-z]{1,6}", 1..8), rot in 0usize..8) {
            let an = Analyzer::default();
            let o = obj("alpha beta gamma delta epsilon zeta");
            let mut shuffled = words.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
            prop_assert_eq!(
                keyword_score(&an, &words.join(" "), &o),
                keyword_score(&an, &shuffled.join(" "), &o)
            );
        }
    }
}
