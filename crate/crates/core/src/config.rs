//! Shared domain types: dataset records, compression settings and results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ScoreVector;

/// One question-answering example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub context: String,
    pub query: String,
    /// Acceptable gold answers. Empty when the record is only compressed.
    #[serde(default)]
    pub answers: Vec<String>,
}

impl QaRecord {
    pub fn new(
        id: impl Into<String>,
        context: impl Into<String>,
        query: impl Into<String>,
        answers: Vec<String>,
    ) -> Result<Self> {
        let record = QaRecord {
            id: id.into(),
            context: context.into(),
            query: query.into(),
            answers,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context.trim().is_empty() {
            return Err(Error::InvalidInput(format!("record {:?}: empty context", self.id)));
        }
        if self.query.trim().is_empty() {
            return Err(Error::InvalidInput(format!("record {:?}: empty query", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The whole context goes through the backend in one pass.
    #[default]
    Single,
    /// Compress each chunk at ratio tau, then concatenate.
    #[serde(alias = "chunk1")]
    Chunked1,
    /// Score every chunk, merge raw scores, then select globally.
    #[serde(alias = "chunk2")]
    Chunked2,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Strategy::Single),
            "chunk1" | "chunked1" => Ok(Strategy::Chunked1),
            "chunk2" | "chunked2" => Ok(Strategy::Chunked2),
            other => Err(format!("unknown strategy {other:?} (expected single|chunk1|chunk2)")),
        }
    }
}

/// Which decoder layers contribute to the averaged attention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LayerSelect {
    #[default]
    All,
    Last,
    Indices(Vec<usize>),
}

impl LayerSelect {
    /// Resolves the selection against a model with `layer_count` layers.
    pub fn resolve(&self, layer_count: usize) -> Result<Vec<usize>> {
        if layer_count == 0 {
            return Err(Error::InvalidInput("model reports zero layers".into()));
        }
        match self {
            LayerSelect::All => Ok((0..layer_count).collect()),
            LayerSelect::Last => Ok(vec![layer_count - 1]),
            LayerSelect::Indices(idx) => {
                if idx.is_empty() {
                    return Err(Error::InvalidConfig {
                        field: "layer_select",
                        reason: "empty index list".into(),
                    });
                }
                if let Some(bad) = idx.iter().find(|&&i| i >= layer_count) {
                    return Err(Error::InvalidConfig {
                        field: "layer_select",
                        reason: format!("layer {bad} out of range for {layer_count} layers"),
                    });
                }
                Ok(idx.clone())
            }
        }
    }
}

impl std::str::FromStr for LayerSelect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(LayerSelect::All),
            "last" => Ok(LayerSelect::Last),
            list => list
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(LayerSelect::Indices)
                .map_err(|_| format!("expected all|last|comma-separated indices, got {list:?}")),
        }
    }
}

/// How raw chunk scores are normalized before the global merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChunkSoftmax {
    /// One softmax over the concatenated raw scores of every chunk.
    #[default]
    Global,
    /// Softmax inside each chunk; every chunk then carries equal mass.
    PerChunk,
}

/// Tie-breaking policy for ranking. Only one policy exists; the field is kept
/// so that result provenance states it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    EarlierPositionWins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionConfig {
    /// Fraction of words to keep, in (0, 1].
    pub tau: f64,
    /// Gaussian standard deviation in word units; 0 disables smoothing.
    pub sigma: f64,
    /// Half-width of the smoothing kernel.
    pub window_k: usize,
    /// Maximum context tokens per chunk.
    pub chunk_size: usize,
    pub strategy: Strategy,
    pub layer_select: LayerSelect,
    pub min_retained: usize,
    pub tie_break: TieBreak,
    pub chunk_softmax: ChunkSoftmax,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            tau: 0.5,
            sigma: 1.0,
            window_k: 3,
            chunk_size: 512,
            strategy: Strategy::Single,
            layer_select: LayerSelect::All,
            min_retained: 1,
            tie_break: TieBreak::EarlierPositionWins,
            chunk_softmax: ChunkSoftmax::Global,
        }
    }
}

impl CompressionConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Parses a JSON config document; absent fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CompressionConfig = serde_json::from_str(text)?;
        validate_config(cfg)
    }

    /// Number of words kept out of `n_words`.
    pub fn target_count(&self, n_words: usize) -> usize {
        target_count(n_words, self.tau, self.min_retained)
    }
}

/// Checks every field invariant and hands the config back untouched.
pub fn validate_config(cfg: CompressionConfig) -> Result<CompressionConfig> {
    if !cfg.tau.is_finite() || cfg.tau <= 0.0 || cfg.tau > 1.0 {
        return Err(Error::InvalidConfig {
            field: "tau",
            reason: format!("tau out of range: {} not in (0, 1]", cfg.tau),
        });
    }
    if !cfg.sigma.is_finite() || cfg.sigma < 0.0 {
        return Err(Error::InvalidConfig {
            field: "sigma",
            reason: format!("sigma must be finite and >= 0, got {}", cfg.sigma),
        });
    }
    if cfg.window_k < 1 {
        return Err(Error::InvalidConfig {
            field: "window_k",
            reason: "window_k must be >= 1".into(),
        });
    }
    if cfg.chunk_size < 8 {
        return Err(Error::InvalidConfig {
            field: "chunk_size",
            reason: format!("chunk_size must be >= 8, got {}", cfg.chunk_size),
        });
    }
    if cfg.min_retained < 1 {
        return Err(Error::InvalidConfig {
            field: "min_retained",
            reason: "min_retained must be >= 1".into(),
        });
    }
    if let LayerSelect::Indices(idx) = &cfg.layer_select {
        if idx.is_empty() {
            return Err(Error::InvalidConfig {
                field: "layer_select",
                reason: "empty index list".into(),
            });
        }
    }
    Ok(cfg)
}

/// `max(min_retained, round_half_up(tau * n))`, never more than `n`.
pub fn target_count(n_words: usize, tau: f64, min_retained: usize) -> usize {
    if n_words == 0 {
        return 0;
    }
    // The epsilon absorbs products such as 0.3 * 5 landing a hair below .5.
    let rounded = (tau * n_words as f64 + 0.5 + 1e-9).floor() as usize;
    rounded.max(min_retained).min(n_words)
}

/// Settings recorded alongside each result so runs can be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: CompressionConfig,
    pub scorer: String,
    /// How context and query were joined for the encoder.
    pub input_format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub id: String,
    pub compressed_text: String,
    pub retained_word_indices: Vec<usize>,
    pub n_words: usize,
    pub word_scores_raw: ScoreVector,
    pub word_scores_smoothed: ScoreVector,
    /// Retained words over original words.
    pub achieved_ratio: f64,
    pub provenance: Provenance,
}
