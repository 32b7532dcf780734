use std::collections::HashMap;

use crate::config::LayerSelect;
use crate::error::{Error, Result};
use crate::segmenter::{align, segment_words, TokenSpan};

use super::{AttentionRequest, PieceTokenizer, RawScoreVector, Scorer, ScorerKind};

/// Test seam: scores come from a word table instead of a model.
///
/// Each token receives its word's table score divided by the number of tokens
/// in that word, so summing tokens back into words recovers the table value.
#[derive(Debug, Clone)]
pub struct MockScorer {
    table: HashMap<String, f64>,
    default: Option<f64>,
    tokenizer: PieceTokenizer,
}

impl MockScorer {
    pub fn new(table: HashMap<String, f64>) -> Self {
        MockScorer {
            table,
            default: None,
            tokenizer: PieceTokenizer::default(),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self::new(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Score for words absent from the table instead of an error.
    pub fn with_default(mut self, default: f64) -> Self {
        self.default = Some(default);
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: PieceTokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    fn lookup(&self, word: &str) -> Result<f64> {
        self.table
            .get(word)
            .copied()
            .or(self.default)
            .ok_or_else(|| Error::MissingWord(word.to_string()))
    }
}

impl Scorer for MockScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Mock
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        self.tokenizer.tokenize(text)
    }

    fn score(&self, req: &AttentionRequest<'_>, _layers: &LayerSelect) -> Result<RawScoreVector> {
        req.validate()?;
        let tokens = self.tokenize(req.context)?;
        let words = segment_words(req.context);
        let alignment = align(&tokens, &words, req.context)?;
        let per_word = alignment.tokens_per_word(words.len());
        let mut scores = Vec::with_capacity(tokens.len());
        for w in &alignment.word_of_token {
            let w = w.ok_or_else(|| Error::AlignmentMismatch("mock token without word".into()))?;
            scores.push(self.lookup(&words[w].text)? / per_word[w] as f64);
        }
        RawScoreVector::new(scores, tokens)
    }

    fn input_format(&self) -> String {
        "context only (mock table)".into()
    }
}
