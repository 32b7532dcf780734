//! Word units over raw text and token-to-word alignment.
//!
//! A word is a maximal run of non-whitespace characters; punctuation stays
//! attached to its run. All offsets are byte offsets into the source text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub token_index: usize,
    pub token_id: u32,
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(token_index: usize, token_id: u32, start: usize, end: usize) -> Self {
        TokenSpan {
            token_index,
            token_id,
            start,
            end,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Maps each token to the word it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `None` for special tokens that carry no text.
    pub word_of_token: Vec<Option<usize>>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.word_of_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_of_token.is_empty()
    }

    /// Number of tokens attached to each of `n_words` words.
    pub fn tokens_per_word(&self, n_words: usize) -> Vec<usize> {
        let mut counts = vec![0; n_words];
        for w in self.word_of_token.iter().flatten() {
            if *w < n_words {
                counts[*w] += 1;
            }
        }
        counts
    }
}

/// Splits `text` into maximal non-whitespace runs.
pub fn segment_words(text: &str) -> Vec<WordSpan> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    for (pos, ch) in text.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(pos),
            (true, Some(s)) => {
                push_word(&mut words, text, s, pos);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push_word(&mut words, text, s, text.len());
    }
    words
}

fn push_word(words: &mut Vec<WordSpan>, text: &str, start: usize, end: usize) {
    words.push(WordSpan {
        index: words.len(),
        start,
        end,
        text: text[start..end].to_string(),
    });
}

/// Assigns every token to a word of `text`.
///
/// A token belongs to the word it overlaps most (earlier word on a tie).
/// Zero-length tokens map to `None`. A token covering only whitespace attaches
/// to the next word, or to the previous one at the end of the text.
pub fn align(tokens: &[TokenSpan], words: &[WordSpan], text: &str) -> Result<Alignment> {
    let mut word_of_token = Vec::with_capacity(tokens.len());
    // Words and tokens are both sorted, so one cursor suffices.
    let mut cursor = 0usize;
    for tok in tokens {
        if tok.end > text.len() || tok.start > tok.end {
            return Err(Error::InvalidInput(format!(
                "token {} has offsets [{}, {}) outside text of length {}",
                tok.token_index,
                tok.start,
                tok.end,
                text.len()
            )));
        }
        if tok.is_empty() {
            word_of_token.push(None);
            continue;
        }
        while cursor < words.len() && words[cursor].end <= tok.start {
            cursor += 1;
        }
        let mut best: Option<(usize, usize)> = None;
        let mut w = cursor;
        while w < words.len() && words[w].start < tok.end {
            let overlap = tok.end.min(words[w].end) - tok.start.max(words[w].start);
            if overlap > 0 && best.is_none_or(|(_, o)| overlap > o) {
                best = Some((w, overlap));
            }
            w += 1;
        }
        let word = match best {
            Some((w, _)) => w,
            None => {
                let covered = text.get(tok.start..tok.end).unwrap_or("");
                if !covered.chars().all(char::is_whitespace) || words.is_empty() {
                    return Err(Error::UnalignedToken {
                        token_index: tok.token_index,
                        char_start: tok.start,
                        char_end: tok.end,
                    });
                }
                if cursor < words.len() {
                    cursor
                } else {
                    words.len() - 1
                }
            }
        };
        word_of_token.push(Some(word));
    }
    check_contiguous(&word_of_token)?;
    Ok(Alignment { word_of_token })
}

fn check_contiguous(word_of_token: &[Option<usize>]) -> Result<()> {
    let mut last: Option<usize> = None;
    for w in word_of_token.iter().flatten() {
        if let Some(prev) = last {
            if *w < prev {
                return Err(Error::AlignmentMismatch(format!(
                    "tokens of word {w} are not contiguous (seen after word {prev})"
                )));
            }
        }
        last = Some(*w);
    }
    Ok(())
}
