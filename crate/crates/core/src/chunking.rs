//! Long contexts: fixed-size token chunks and the two ways of compressing them.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::{ChunkSoftmax, CompressionConfig, CompressionResult, QaRecord};
use crate::error::{Error, Result};
use crate::pipeline::{
    aggregate_words, compress_single, finish, provenance, request, softmax, ScoreVector, Stage,
    WordScores,
};
use crate::scorer::{RawScoreVector, Scorer};
use crate::segmenter::{align, segment_words, Alignment, TokenSpan, WordSpan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_index: usize,
    /// Context tokens covered, `[start, end)`.
    pub token_range: Range<usize>,
    /// Byte range in the context. Consecutive chunks tile the whole context,
    /// separators included.
    pub char_range: Range<usize>,
    pub text: String,
}

/// Greedy left-to-right packing of at most `chunk_size` tokens per chunk.
///
/// A boundary that would split a word moves back to that word's first token.
pub fn make_chunks(
    text: &str,
    tokens: &[TokenSpan],
    alignment: &Alignment,
    chunk_size: usize,
) -> Result<Vec<Chunk>> {
    if chunk_size < 8 {
        return Err(Error::InvalidConfig {
            field: "chunk_size",
            reason: format!("chunk_size must be >= 8, got {chunk_size}"),
        });
    }
    if tokens.len() != alignment.len() {
        return Err(Error::AlignmentMismatch(format!(
            "{} tokens but {} aligned entries",
            tokens.len(),
            alignment.len()
        )));
    }
    let word_of = &alignment.word_of_token;
    let n = tokens.len();
    let mut bounds = Vec::new();
    let mut start = 0usize;
    while start < n {
        let mut end = (start + chunk_size).min(n);
        if end < n {
            if let (Some(a), Some(b)) = (word_of[end - 1], word_of[end]) {
                if a == b {
                    // back up to the first token of the straddling word
                    let mut first = end;
                    while first > start && word_of[first - 1] == Some(a) {
                        first -= 1;
                    }
                    if first == start {
                        let mut last = end;
                        while last < n && word_of[last] == Some(a) {
                            last += 1;
                        }
                        return Err(Error::WordExceedsChunk {
                            word_index: a,
                            tokens: last - start,
                            chunk_size,
                        });
                    }
                    end = first;
                }
            }
        }
        bounds.push(start..end);
        start = end;
    }
    let mut chunks = Vec::with_capacity(bounds.len());
    for (i, range) in bounds.iter().enumerate() {
        let char_start = if i == 0 { 0 } else { tokens[range.start].start };
        let char_end = bounds
            .get(i + 1)
            .map_or(text.len(), |next| tokens[next.start].start);
        chunks.push(Chunk {
            chunk_index: i,
            token_range: range.clone(),
            char_range: char_start..char_end,
            text: text[char_start..char_end].to_string(),
        });
    }
    Ok(chunks)
}

/// Chunks of `record.context` under the scorer's own tokenizer.
pub fn chunks_for(record: &QaRecord, cfg: &CompressionConfig, scorer: &dyn Scorer) -> Result<Vec<Chunk>> {
    record.validate()?;
    let tokens = scorer.tokenize(&record.context)?;
    let words = segment_words(&record.context);
    let alignment = align(&tokens, &words, &record.context)?;
    make_chunks(&record.context, &tokens, &alignment, cfg.chunk_size)
}

fn words_before(words: &[WordSpan], byte: usize) -> usize {
    words.partition_point(|w| w.start < byte)
}

/// Compresses every chunk on its own at ratio tau and joins the pieces with
/// single spaces.
pub fn compress_strategy1(
    record: &QaRecord,
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<CompressionResult> {
    let chunks = chunks_for(record, cfg, scorer)?;
    if chunks.len() == 1 {
        return compress_single(record, cfg, scorer);
    }
    let words = segment_words(&record.context);
    let mut texts = Vec::with_capacity(chunks.len());
    let mut retained = Vec::new();
    let mut raw_scores = Vec::with_capacity(words.len());
    let mut smoothed = Vec::with_capacity(words.len());
    for chunk in &chunks {
        let sub = QaRecord {
            context: chunk.text.clone(),
            ..record.clone()
        };
        let r = compress_single(&sub, cfg, scorer).map_err(|e| e.in_chunk(chunk.chunk_index))?;
        let offset = words_before(&words, chunk.char_range.start);
        retained.extend(r.retained_word_indices.iter().map(|i| i + offset));
        raw_scores.extend(r.word_scores_raw.values);
        smoothed.extend(r.word_scores_smoothed.values);
        texts.push(r.compressed_text);
    }
    if raw_scores.len() != words.len() {
        return Err(Error::AlignmentMismatch(format!(
            "chunks hold {} words, context has {}",
            raw_scores.len(),
            words.len()
        )));
    }
    Ok(CompressionResult {
        id: record.id.clone(),
        compressed_text: texts.join(" "),
        achieved_ratio: retained.len() as f64 / words.len() as f64,
        retained_word_indices: retained,
        n_words: words.len(),
        word_scores_raw: ScoreVector::new(raw_scores, Stage::Word),
        word_scores_smoothed: ScoreVector::new(smoothed, Stage::SmoothedWord),
        provenance: provenance(cfg, scorer),
    })
}

/// Raw scores of every chunk, in global context coordinates.
pub fn merged_raw_scores(
    record: &QaRecord,
    chunks: &[Chunk],
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<Vec<RawScoreVector>> {
    let mut out = Vec::with_capacity(chunks.len());
    let mut next_index = 0;
    for chunk in chunks {
        let req = request(record, &chunk.text, scorer);
        let raw = scorer
            .score(&req, &cfg.layer_select)
            .map_err(|e| e.in_chunk(chunk.chunk_index))?
            .shifted(chunk.char_range.start, next_index);
        next_index += raw.len();
        out.push(raw);
    }
    Ok(out)
}

/// Word scores after the chunk merge of strategy 2.
pub fn strategy2_word_scores(
    record: &QaRecord,
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<WordScores> {
    let chunks = chunks_for(record, cfg, scorer)?;
    let per_chunk = merged_raw_scores(record, &chunks, cfg, scorer)?;
    let normalized: Vec<f64> = match cfg.chunk_softmax {
        ChunkSoftmax::Global => {
            let all: Vec<f64> = per_chunk.iter().flat_map(|r| r.scores.iter().copied()).collect();
            softmax(&all)?
        }
        ChunkSoftmax::PerChunk => {
            let share = 1.0 / per_chunk.len() as f64;
            let mut v = Vec::new();
            for r in &per_chunk {
                v.extend(softmax(&r.scores)?.into_iter().map(|s| s * share));
            }
            v
        }
    };
    let spans: Vec<TokenSpan> = per_chunk.into_iter().flat_map(|r| r.token_spans).collect();
    let words = segment_words(&record.context);
    let alignment = align(&spans, &words, &record.context)?;
    let scores = aggregate_words(
        &ScoreVector::new(normalized, Stage::NormalizedToken),
        &alignment,
        words.len(),
    )?;
    Ok(WordScores { words, scores })
}

/// Scores every chunk against the query, merges raw scores under one softmax
/// and runs a single global selection.
pub fn compress_strategy2(
    record: &QaRecord,
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<CompressionResult> {
    let ws = strategy2_word_scores(record, cfg, scorer)?;
    Ok(finish(record, &ws, cfg, provenance(cfg, scorer)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::PieceTokenizer;

    fn one_token_per_word(n: usize) -> (String, Vec<TokenSpan>, Alignment) {
        let text: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let text = text.join(" ");
        let tokens = PieceTokenizer::whole_words().tokenize(&text).unwrap();
        let words = segment_words(&text);
        let alignment = align(&tokens, &words, &text).unwrap();
        (text, tokens, alignment)
    }

    #[test]
    fn word_edge_boundaries() {
        let (text, tokens, a) = one_token_per_word(1000);
        let chunks = make_chunks(&text, &tokens, &a, 512).unwrap();
        let ranges: Vec<_> = chunks.iter().map(|c| c.token_range.clone()).collect();
        assert_eq!(ranges, vec![0..512, 512..1000]);
        let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(joined, text);
    }

    #[test]
    fn short_context_single_chunk() {
        let (text, tokens, a) = one_token_per_word(100);
        let chunks = make_chunks(&text, &tokens, &a, 512).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, text);
    }

    #[test]
    fn boundary_snaps_back_mid_word() {
        // 600 tokens where word 510 spans tokens 510..515
        let mut word_of: Vec<Option<usize>> = (0..510).map(Some).collect();
        word_of.extend([Some(510); 5]);
        word_of.extend((511..596).map(Some));
        let tokens: Vec<TokenSpan> = (0..word_of.len())
            .map(|i| TokenSpan::new(i, 0, i, i + 1))
            .collect();
        let text = "x".repeat(word_of.len());
        let a = Alignment { word_of_token: word_of };
        let chunks = make_chunks(&text, &tokens, &a, 512).unwrap();
        assert_eq!(chunks[0].token_range, 0..510);
        assert_eq!(chunks[1].token_range.start, 510);
    }

    #[test]
    fn oversized_word_rejected() {
        let a = Alignment {
            word_of_token: vec![Some(0); 20],
        };
        let tokens: Vec<TokenSpan> = (0..20).map(|i| TokenSpan::new(i, 0, i, i + 1)).collect();
        let err = make_chunks(&"x".repeat(20), &tokens, &a, 8).unwrap_err();
        assert!(matches!(err, Error::WordExceedsChunk { word_index: 0, tokens: 20, chunk_size: 8 }));
    }

    #[test]
    fn chunk_size_floor() {
        let (text, tokens, a) = one_token_per_word(3);
        assert!(make_chunks(&text, &tokens, &a, 7).is_err());
    }
}
