//! Per-token importance scoring backends.
//!
//! Every scorer returns one raw score per context token and none for query
//! tokens. Cross-attention scorers need exported model artifacts (see
//! [`manifest`]); the mock and random scorers run without any model.

pub mod manifest;
mod factory;
mod mock;
#[cfg(feature = "onnx")]
pub mod onnx;
mod piece;
mod random;

use serde::{Deserialize, Serialize};

use crate::config::LayerSelect;
use crate::error::{Error, Result};
use crate::segmenter::TokenSpan;

pub use factory::{MockTable, ScorerFactory};
pub use mock::MockScorer;
pub use piece::PieceTokenizer;
pub use random::RandomScorer;

/// The separator placed between context and query in the encoder input.
pub const CONTEXT_QUERY_SEPARATOR: &str = " ";

#[derive(Debug, Clone, Copy)]
pub struct AttentionRequest<'a> {
    pub context: &'a str,
    pub query: &'a str,
    /// Gold answer, needed only for teacher-forced scoring.
    pub target: Option<&'a str>,
}

impl<'a> AttentionRequest<'a> {
    pub fn new(context: &'a str, query: &'a str) -> Self {
        AttentionRequest {
            context,
            query,
            target: None,
        }
    }

    pub fn with_target(mut self, target: Option<&'a str>) -> Self {
        self.target = target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.context.trim().is_empty() {
            return Err(Error::InvalidInput("empty context".into()));
        }
        if self.query.trim().is_empty() {
            return Err(Error::InvalidInput("empty query".into()));
        }
        Ok(())
    }
}

/// Raw scores for the context tokens, in token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScoreVector {
    pub scores: Vec<f64>,
    pub token_spans: Vec<TokenSpan>,
}

impl RawScoreVector {
    pub fn new(scores: Vec<f64>, token_spans: Vec<TokenSpan>) -> Result<Self> {
        if scores.len() != token_spans.len() {
            return Err(Error::AlignmentMismatch(format!(
                "{} scores for {} tokens",
                scores.len(),
                token_spans.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Inference(format!("non-finite score at token {i}")));
        }
        Ok(RawScoreVector {
            scores,
            token_spans,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Moves every span by `offset` bytes and renumbers tokens from `first_index`.
    pub fn shifted(mut self, offset: usize, first_index: usize) -> Self {
        for (i, t) in self.token_spans.iter_mut().enumerate() {
            t.start += offset;
            t.end += offset;
            t.token_index = first_index + i;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// Cross-attention of the decoder start position over the encoder input.
    CrossAttnFirst,
    /// Cross-attention averaged over teacher-forced steps of the gold answer.
    CrossAttnTotal,
    /// Encoder self-attention mass flowing from query tokens to each context token.
    SelfAttention,
    /// Surprisal under a causal language model, in bits.
    SelfInformation,
    Mock,
    Random { seed: u64 },
}

impl ScorerKind {
    pub fn label(&self) -> String {
        match self {
            ScorerKind::CrossAttnFirst => "cross-first".into(),
            ScorerKind::CrossAttnTotal => "cross-total".into(),
            ScorerKind::SelfAttention => "self-attn".into(),
            ScorerKind::SelfInformation => "self-info".into(),
            ScorerKind::Mock => "mock".into(),
            ScorerKind::Random { seed } => format!("random(seed={seed})"),
        }
    }

    /// Parses a CLI scorer name; `seed` fills the random variant.
    pub fn parse(name: &str, seed: u64) -> Result<Self, String> {
        match name {
            "cross-first" => Ok(ScorerKind::CrossAttnFirst),
            "cross-total" => Ok(ScorerKind::CrossAttnTotal),
            "self-attn" => Ok(ScorerKind::SelfAttention),
            "self-info" => Ok(ScorerKind::SelfInformation),
            "mock" => Ok(ScorerKind::Mock),
            "random" => Ok(ScorerKind::Random { seed }),
            other => Err(format!(
                "unknown scorer {other:?} (expected cross-first|cross-total|self-attn|self-info|mock|random)"
            )),
        }
    }

    pub fn needs_target(&self) -> bool {
        matches!(self, ScorerKind::CrossAttnTotal)
    }
}

/// A token-importance backend.
///
/// One instance serves one inference at a time; create one per worker for
/// parallel runs.
pub trait Scorer: Send {
    fn kind(&self) -> ScorerKind;

    /// Tokenizes `text` into non-special tokens with byte offsets.
    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>>;

    /// Scores every context token of `req`.
    fn score(&self, req: &AttentionRequest<'_>, layers: &LayerSelect) -> Result<RawScoreVector>;

    fn name(&self) -> String {
        self.kind().label()
    }

    /// How context and query are joined for the backend.
    fn input_format(&self) -> String {
        "context ⊕ \" \" ⊕ query".into()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn kind(&self) -> ScorerKind {
        (**self).kind()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        (**self).tokenize(text)
    }

    fn score(&self, req: &AttentionRequest<'_>, layers: &LayerSelect) -> Result<RawScoreVector> {
        (**self).score(req, layers)
    }

    fn name(&self) -> String {
        (**self).name()
    }

    fn input_format(&self) -> String {
        (**self).input_format()
    }
}

/// Surprisal `-log2 p` in bits.
pub fn self_information_bits(probability: f64) -> f64 {
    -probability.log2()
}

/// 1-based rank of every position when sorted by descending score, with
/// earlier positions first among equal scores.
pub fn descending_ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}
