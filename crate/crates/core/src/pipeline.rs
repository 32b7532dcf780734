//! From raw token scores to a compressed context.
//!
//! tokenize/score -> softmax over context tokens -> sum into words ->
//! Gaussian smoothing over word positions -> keep the top tau fraction ->
//! rebuild the text in original order.

use serde::{Deserialize, Serialize};

use crate::config::{
    validate_config, CompressionConfig, CompressionResult, Provenance, QaRecord, Strategy,
};
use crate::error::{Error, Result};
use crate::scorer::{AttentionRequest, RawScoreVector, Scorer};
use crate::segmenter::{align, segment_words, Alignment, WordSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    RawToken,
    NormalizedToken,
    Word,
    SmoothedWord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub stage: Stage,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, stage: Stage) -> Self {
        ScoreVector { values, stage }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Numerically stable softmax over the context-token scores.
pub fn normalize(raw: &RawScoreVector) -> Result<ScoreVector> {
    Ok(ScoreVector::new(softmax(&raw.scores)?, Stage::NormalizedToken))
}

pub(crate) fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty score vector".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidInput("non-finite raw score".into()));
    }
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Sums normalized token scores into their words.
pub fn aggregate_words(
    norm: &ScoreVector,
    alignment: &Alignment,
    n_words: usize,
) -> Result<ScoreVector> {
    if norm.len() != alignment.len() {
        return Err(Error::AlignmentMismatch(format!(
            "{} scores but {} aligned tokens",
            norm.len(),
            alignment.len()
        )));
    }
    let mut words = vec![0.0; n_words];
    let mut seen = vec![false; n_words];
    for (t, (score, word)) in norm.values.iter().zip(&alignment.word_of_token).enumerate() {
        let w = word.ok_or_else(|| {
            Error::AlignmentMismatch(format!("scored token {t} is not part of any word"))
        })?;
        if w >= n_words {
            return Err(Error::AlignmentMismatch(format!(
                "token {t} maps to word {w} but there are only {n_words} words"
            )));
        }
        words[w] += score;
        seen[w] = true;
    }
    if let Some(w) = seen.iter().position(|s| !s) {
        return Err(Error::AlignmentMismatch(format!("word {w} received no tokens")));
    }
    Ok(ScoreVector::new(words, Stage::Word))
}

/// Gaussian density `exp(-k^2 / 2 sigma^2) / (sigma sqrt(2 pi))` for k in -K..=K.
pub fn gaussian_kernel(sigma: f64, half_width: usize) -> Vec<f64> {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let k = half_width as isize;
    (-k..=k)
        .map(|d| {
            let d = d as f64;
            norm * (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Discrete convolution of word scores with the Gaussian kernel.
///
/// Positions outside the sequence contribute zero. `sigma == 0` disables
/// smoothing and returns the scores unchanged.
pub fn gaussian_smooth(word_scores: &ScoreVector, sigma: f64, half_width: usize) -> ScoreVector {
    if sigma == 0.0 {
        return ScoreVector::new(word_scores.values.clone(), Stage::SmoothedWord);
    }
    let kernel = gaussian_kernel(sigma, half_width);
    let n = word_scores.len() as isize;
    let k = half_width as isize;
    let values = (0..n)
        .map(|w| {
            (-k..=k)
                .filter(|d| (0..n).contains(&(w + d)))
                .map(|d| word_scores.values[(w + d) as usize] * kernel[(d + k) as usize])
                .sum()
        })
        .collect();
    ScoreVector::new(values, Stage::SmoothedWord)
}

/// Indices of the retained words, ascending.
///
/// Keeps `max(min_retained, round_half_up(tau * N))` words with the highest
/// scores; among equal scores the earlier word wins.
pub fn select_top(smoothed: &ScoreVector, tau: f64, min_retained: usize) -> Vec<usize> {
    let keep = crate::config::target_count(smoothed.len(), tau, min_retained);
    let v = &smoothed.values;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order.sort_unstable();
    order
}

/// Joins retained words. Neighbours that were adjacent in the original keep
/// their original separator; other gaps become one space.
pub fn reconstruct(context: &str, words: &[WordSpan], retained: &[usize]) -> String {
    let mut out = String::new();
    let mut prev: Option<usize> = None;
    for &i in retained {
        let w = &words[i];
        match prev {
            Some(p) if p + 1 == i => out.push_str(&context[words[p].end..w.start]),
            Some(_) => out.push(' '),
            None => {}
        }
        out.push_str(&w.text);
        prev = Some(i);
    }
    out
}

/// Word-level scores of one context before selection.
#[derive(Debug, Clone)]
pub struct WordScores {
    pub words: Vec<WordSpan>,
    pub scores: ScoreVector,
}

/// Aligns raw token scores to the words of `context` and sums them up.
pub fn word_scores_from_raw(context: &str, raw: &RawScoreVector) -> Result<WordScores> {
    let words = segment_words(context);
    if words.is_empty() {
        return Err(Error::InvalidInput("context contains no words".into()));
    }
    let alignment = align(&raw.token_spans, &words, context)?;
    let norm = normalize(raw)?;
    let scores = aggregate_words(&norm, &alignment, words.len())?;
    Ok(WordScores { words, scores })
}

/// Smoothing, selection and reconstruction on precomputed word scores.
pub fn finish(
    record: &QaRecord,
    word_scores: &WordScores,
    cfg: &CompressionConfig,
    provenance: Provenance,
) -> CompressionResult {
    let smoothed = gaussian_smooth(&word_scores.scores, cfg.sigma, cfg.window_k);
    let retained = select_top(&smoothed, cfg.tau, cfg.min_retained);
    let n_words = word_scores.words.len();
    CompressionResult {
        id: record.id.clone(),
        compressed_text: reconstruct(&record.context, &word_scores.words, &retained),
        achieved_ratio: retained.len() as f64 / n_words as f64,
        retained_word_indices: retained,
        n_words,
        word_scores_raw: word_scores.scores.clone(),
        word_scores_smoothed: smoothed,
        provenance,
    }
}

pub(crate) fn provenance(cfg: &CompressionConfig, scorer: &dyn Scorer) -> Provenance {
    Provenance {
        config: cfg.clone(),
        scorer: scorer.name(),
        input_format: scorer.input_format(),
    }
}

pub(crate) fn request<'a>(record: &'a QaRecord, context: &'a str, scorer: &dyn Scorer) -> AttentionRequest<'a> {
    let target = if scorer.kind().needs_target() {
        record.answers.first().map(String::as_str)
    } else {
        None
    };
    AttentionRequest::new(context, &record.query).with_target(target)
}

/// Compresses the whole context in a single backend pass.
pub fn compress_single(
    record: &QaRecord,
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<CompressionResult> {
    record.validate()?;
    let raw = scorer.score(&request(record, &record.context, scorer), &cfg.layer_select)?;
    let ws = word_scores_from_raw(&record.context, &raw)?;
    Ok(finish(record, &ws, cfg, provenance(cfg, scorer)))
}

/// Compresses `record` with the strategy named in `cfg`.
pub fn compress(
    record: &QaRecord,
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<CompressionResult> {
    let cfg = validate_config(cfg.clone())?;
    match cfg.strategy {
        Strategy::Single => compress_single(record, &cfg, scorer),
        Strategy::Chunked1 => crate::chunking::compress_strategy1(record, &cfg, scorer),
        Strategy::Chunked2 => crate::chunking::compress_strategy2(record, &cfg, scorer),
    }
}
