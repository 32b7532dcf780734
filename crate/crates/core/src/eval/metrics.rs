use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::TokenSpan;

pub const EM_NORMALIZATION: &str =
    "lowercase; drop ASCII punctuation; drop articles a/an/the; collapse whitespace";

/// Standard QA answer normalization.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1.0 when the normalized prediction equals any normalized gold answer.
pub fn exact_match(prediction: &str, golds: &[String]) -> f64 {
    let p = normalize_answer(prediction);
    if golds.iter().any(|g| normalize_answer(g) == p) {
        1.0
    } else {
        0.0
    }
}

/// 1.0 when the answer survives as a contiguous run of normalized words in
/// the compressed context.
pub fn information_coverage(compressed: &str, answer: &str) -> f64 {
    let mut needle = normalize_answer(answer);
    let mut hay = normalize_answer(compressed);
    if needle.is_empty() {
        // answer made only of articles/punctuation: fall back to case folding
        needle = answer.to_lowercase();
        hay = compressed.to_lowercase();
    }
    let needle: Vec<&str> = needle.split_whitespace().collect();
    let hay: Vec<&str> = hay.split_whitespace().collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return 0.0;
    }
    if hay.windows(needle.len()).any(|w| w == needle.as_slice()) {
        1.0
    } else {
        0.0
    }
}

/// Byte range of the first case-insensitive occurrence of `needle`.
pub fn find_case_insensitive(haystack: &str, needle: &str) -> Option<std::ops::Range<usize>> {
    if needle.is_empty() {
        return None;
    }
    let folded_needle: Vec<char> = needle.chars().flat_map(char::to_lowercase).collect();
    for (start, _) in haystack.char_indices() {
        let mut want = folded_needle.iter();
        let mut end = start;
        let mut matched = true;
        let mut pending: Vec<char> = Vec::new();
        'outer: for (off, ch) in haystack[start..].char_indices() {
            pending.clear();
            pending.extend(ch.to_lowercase());
            for c in &pending {
                match want.next() {
                    Some(w) if w == c => {}
                    _ => {
                        matched = false;
                        break 'outer;
                    }
                }
            }
            end = start + off + ch.len_utf8();
            if want.len() == 0 {
                break;
            }
        }
        if matched && want.len() == 0 {
            return Some(start..end);
        }
    }
    None
}

/// Contiguous token positions of an answer inside the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub start: usize,
    pub len: usize,
}

impl AnswerSpan {
    pub fn positions(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Tokens overlapping the first case-insensitive occurrence of `answer`.
pub fn locate_answer_span(context: &str, answer: &str, tokens: &[TokenSpan]) -> Result<AnswerSpan> {
    let bytes = find_case_insensitive(context, answer.trim())
        .ok_or_else(|| Error::InvalidInput(format!("answer {answer:?} not found in context")))?;
    let hits: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < bytes.end && t.end > bytes.start && !t.is_empty())
        .map(|(i, _)| i)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&first), Some(&last)) => Ok(AnswerSpan {
            start: first,
            len: last - first + 1,
        }),
        _ => Err(Error::InvalidInput(format!("answer {answer:?} covers no token"))),
    }
}
