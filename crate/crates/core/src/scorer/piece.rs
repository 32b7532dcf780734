use crate::error::{Error, Result};
use crate::segmenter::{segment_words, TokenSpan};

/// Deterministic model-free tokenizer used by the mock and random scorers.
///
/// Each word splits into runs of alphanumeric characters, cut every
/// `max_piece_chars` characters, and single punctuation characters. Ids are a
/// stable FNV-1a hash of the piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PieceTokenizer {
    pub max_piece_chars: usize,
}

impl Default for PieceTokenizer {
    fn default() -> Self {
        PieceTokenizer { max_piece_chars: 4 }
    }
}

impl PieceTokenizer {
    /// Each word becomes exactly one token.
    pub fn whole_words() -> Self {
        PieceTokenizer {
            max_piece_chars: usize::MAX,
        }
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("cannot tokenize empty text".into()));
        }
        let mut out = Vec::new();
        for word in segment_words(text) {
            if self.max_piece_chars == usize::MAX {
                out.push(span(out.len(), text, word.start, word.end));
                continue;
            }
            let mut run_start: Option<usize> = None;
            let mut run_chars = 0usize;
            for (off, ch) in word.text.char_indices() {
                let pos = word.start + off;
                if ch.is_alphanumeric() {
                    if run_start.is_some() && run_chars == self.max_piece_chars {
                        out.push(span(out.len(), text, run_start.unwrap(), pos));
                        run_start = None;
                    }
                    if run_start.is_none() {
                        run_start = Some(pos);
                        run_chars = 0;
                    }
                    run_chars += 1;
                } else {
                    if let Some(s) = run_start.take() {
                        out.push(span(out.len(), text, s, pos));
                    }
                    out.push(span(out.len(), text, pos, pos + ch.len_utf8()));
                }
            }
            if let Some(s) = run_start {
                out.push(span(out.len(), text, s, word.end));
            }
        }
        Ok(out)
    }
}

fn span(index: usize, text: &str, start: usize, end: usize) -> TokenSpan {
    TokenSpan::new(index, fnv1a(&text[start..end]) % 32_000, start, end)
}

fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in s.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}
