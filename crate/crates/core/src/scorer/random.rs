use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::LayerSelect;
use crate::error::Result;
use crate::segmenter::TokenSpan;

use super::{AttentionRequest, PieceTokenizer, RawScoreVector, Scorer, ScorerKind};

/// Uniform random scores; the chance-level baseline.
///
/// The stream is seeded from the configured seed and the request text, so a
/// record gets the same scores regardless of processing order.
#[derive(Debug, Clone)]
pub struct RandomScorer {
    seed: u64,
    tokenizer: PieceTokenizer,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        RandomScorer {
            seed,
            tokenizer: PieceTokenizer::default(),
        }
    }

    pub fn with_tokenizer(mut self, tokenizer: PieceTokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    fn rng_for(&self, req: &AttentionRequest<'_>) -> ChaCha8Rng {
        // DefaultHasher::new() uses fixed keys, so this is stable within a build.
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        req.context.hash(&mut h);
        req.query.hash(&mut h);
        ChaCha8Rng::seed_from_u64(h.finish())
    }
}

impl Scorer for RandomScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Random { seed: self.seed }
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        self.tokenizer.tokenize(text)
    }

    fn score(&self, req: &AttentionRequest<'_>, _layers: &LayerSelect) -> Result<RawScoreVector> {
        req.validate()?;
        let tokens = self.tokenize(req.context)?;
        let mut rng = self.rng_for(req);
        let scores = (0..tokens.len()).map(|_| rng.random::<f64>()).collect();
        RawScoreVector::new(scores, tokens)
    }

    fn input_format(&self) -> String {
        "context only (random)".into()
    }
}
