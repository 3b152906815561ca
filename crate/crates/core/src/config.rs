//! Engine configuration: built-in defaults, overlaid by a TOML file, then by
//! command-line flags. The resolved value is echoed into every result file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    Answerer, BackendConfig, EchoAnswerer, FirstSentenceSummarizer, HttpTransport, RemoteAnswerer, RemoteClient,
    RemoteEmbedder, RemoteExtractor, RemoteReranker, RemoteSummarizer, Role, Summarizer, Transport,
};
use crate::extraction::{Extractor, MarkerExtractor};
use crate::graph_build::LinkRules;
use crate::retrieval::{phrase_list, CharRatioCounter, PassthroughReranker, Reranker, RetrievalConfig, TokenCounter};
use crate::scoring::{Embedder, HashingEmbedder};
use crate::text::{Analyzer, Stopwords};


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Mock,
    Remote(BackendConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendsConfig {
    pub extractor: BackendChoice,
    pub embedder: BackendChoice,
    pub reranker: BackendChoice,
    pub answerer: BackendChoice,
    pub summarizer: BackendChoice,
    /// Dimension of the mock feature-hashing embedder.
    pub mock_embedding_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AssetPaths {
    pub prompts_dir: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub causal_indicators: Option<PathBuf>,
    pub temporal_indicators: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchDefaults {
    pub cases: usize,
    pub seed: u64,
    pub recent_turns: usize,
    pub native_context_tokens: usize,
    pub rag_preset: String,
    pub jobs: usize,
}

impl Default for BenchDefaults {
    fn default() -> Self {
        Self {
            cases: 50,
            seed: 1,
            recent_turns: 5,
            native_context_tokens: 1024,
            rag_preset: "rag-default".to_owned(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub gleaning: bool,
    pub linking: LinkRules,
    pub retrieval: RetrievalConfig,
    pub backends: BackendsConfig,
    pub bench: BenchDefaults,
    pub assets: AssetPaths,
    /// Stopword list in effect, filled from the asset file on resolve.
    pub stopwords: Vec<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let mut stopwords: Vec<String> = crate::text::DEFAULT_STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        stopwords.sort();
        Self {
            gleaning: true,
            linking: LinkRules::default(),
            retrieval: RetrievalConfig::default(),
            backends: BackendsConfig::default(),
            bench: BenchDefaults::default(),
            assets: AssetPaths::default(),
            stopwords,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown retrieval preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })
}

impl EngineConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(src)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&read(path)?)
    }

    /// Replaces the retrieval section with a named preset, keeping the
    /// fusion weights and indicator lists already configured.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        let preset = RetrievalConfig::preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_owned()))?;
        self.retrieval = RetrievalConfig {
            weights: self.retrieval.weights,
            indicators: self.retrieval.indicators.clone(),
            ..preset
        };
        Ok(())
    }

    /// Pulls configured asset files into the config and validates it.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if let Some(p) = &self.assets.stopwords {
            let mut words = phrase_list(&read(p)?);
            words.sort();
            words.dedup();
            self.stopwords = words;
        }
        if let Some(p) = &self.assets.causal_indicators {
            self.retrieval.indicators.causal = phrase_list(&read(p)?);
        }
        if let Some(p) = &self.assets.temporal_indicators {
            self.retrieval.indicators.temporal = phrase_list(&read(p)?);
        }
        self.linking
            .thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.retrieval.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(self)
    }

    pub fn analyzer(&self) -> Analyzer {
        Analyzer::new(Stopwords::parse(&self.stopwords.join("\n")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}

/// Concrete backend instances for every role.
pub struct Backends {
    pub extractor: Box<dyn Extractor>,
    pub embedder: Box<dyn Embedder>,
    pub reranker: Box<dyn Reranker>,
    pub answerer: Box<dyn Answerer>,
    pub summarizer: Box<dyn Summarizer>,
    pub counter: Box<dyn TokenCounter>,
}

impl Backends {
    /// Fully offline deterministic backends.
    pub fn mock(analyzer: Analyzer, embedding_dim: usize) -> Self {
        Self {
            extractor: Box::new(MarkerExtractor::default()),
            embedder: Box::new(HashingEmbedder::new(embedding_dim, analyzer)),
            reranker: Box::new(PassthroughReranker),
            answerer: Box::new(EchoAnswerer),
            summarizer: Box::new(FirstSentenceSummarizer),
            counter: Box::new(CharRatioCounter),
        }
    }

    pub fn from_config(cfg: &EngineConfig) -> Result<Self, ConfigError> {
        Self::with_transport(cfg, Arc::new(HttpTransport::new()))
    }

    pub fn with_transport(cfg: &EngineConfig, transport: Arc<dyn Transport>) -> Result<Self, ConfigError> {
        let dim = cfg.backends.mock_embedding_dim.unwrap_or(HashingEmbedder::DEFAULT_DIM);
        let mut b = Self::mock(cfg.analyzer(), dim);
        let prompts = cfg.assets.prompts_dir.as_deref();
        let client = |role, c: &BackendConfig| RemoteClient::new(role, c.clone(), Arc::clone(&transport));
        let prompt_err = |e: std::io::Error| ConfigError::Io {
            path: prompts.map(Path::to_owned).unwrap_or_default(),
            source: e,
        };
        if let BackendChoice::Remote(c) = &cfg.backends.extractor {
            b.extractor = Box::new(RemoteExtractor::new(client(Role::Extractor, c), prompts).map_err(prompt_err)?);
        }
        if let BackendChoice::Remote(c) = &cfg.backends.embedder {
            b.embedder = Box::new(RemoteEmbedder::new(client(Role::Embedder, c)));
        }
        if let BackendChoice::Remote(c) = &cfg.backends.reranker {
            b.reranker = Box::new(RemoteReranker::new(client(Role::Reranker, c)));
        }
        if let BackendChoice::Remote(c) = &cfg.backends.answerer {
            b.answerer = Box::new(RemoteAnswerer::new(client(Role::Answerer, c), prompts).map_err(prompt_err)?);
        }
        if let BackendChoice::Remote(c) = &cfg.backends.summarizer {
            b.summarizer = Box::new(RemoteSummarizer::new(client(Role::Summarizer, c), prompts).map_err(prompt_err)?);
        }
        Ok(b)
    }
}
