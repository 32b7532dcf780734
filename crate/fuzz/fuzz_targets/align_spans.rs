#![no_main]

use libfuzzer_sys::fuzz_target;

use crossprune::segmenter::{align, segment_words, TokenSpan};

// First byte: number of spans. Then two bytes per span (start, end) taken
// modulo the text length; the rest is the text.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let n = (n as usize % 16).min(rest.len() / 2);
    let (spans, text) = rest.split_at(n * 2);
    let Ok(text) = std::str::from_utf8(text) else { return };
    let words = segment_words(text);
    for w in &words {
        assert_eq!(w.text, text[w.start..w.end]);
    }
    let modulo = text.len() + 1;
    let tokens: Vec<TokenSpan> = spans
        .chunks_exact(2)
        .enumerate()
        .map(|(i, p)| {
            let (a, b) = (p[0] as usize % modulo, p[1] as usize % modulo);
            TokenSpan::new(i, i as u32, a.min(b), a.max(b))
        })
        .collect();
    if let Ok(al) = align(&tokens, &words, text) {
        assert_eq!(al.len(), tokens.len());
        assert!(al.word_of_token.iter().flatten().all(|&w| w < words.len()));
    }
});
