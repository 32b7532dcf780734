//! Synthetic QA records and mock score tables shared by the integration tests.
#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crossprune::{MockScorer, QaRecord};

const SUBJECTS: &[&str] = &["the farmer", "a merchant", "the old sailor", "my neighbour", "the teacher", "a young poet"];
const VERBS: &[&str] = &["walked", "talked", "waited", "worked", "slept", "sang", "argued", "rested"];
const FILLER: &[&str] = &[
    "quietly", "for hours", "near the road", "after dinner", "without a word", "under grey skies",
    "with some friends", "before the storm", "during the fair", "on most days",
];
const PLACES: &[&str] = &[
    "Velmora harbor", "Quillon library", "Ostrava mill", "Brennick barn", "Tamsin bridge",
    "Kestrel island", "Marwood chapel", "Dunhollow market",
];
const THINGS: &[&str] = &["painting", "ledger", "lantern", "violin", "compass", "map", "crown", "clock"];

/// A record whose single answer is a phrase that occurs verbatim once in the context.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub record: QaRecord,
    pub answer: String,
}

fn filler_sentence(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {} {}.",
        SUBJECTS.choose(rng).unwrap(),
        VERBS.choose(rng).unwrap(),
        FILLER.choose(rng).unwrap()
    )
}

/// `n` records with `sentences` filler sentences around one answer sentence.
pub fn synthetic_records(n: usize, sentences: usize, seed: u64) -> Vec<Synthetic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let thing = *THINGS.choose(&mut rng).unwrap();
            let place = *PLACES.choose(&mut rng).unwrap();
            let mut parts: Vec<String> = (0..sentences).map(|_| filler_sentence(&mut rng)).collect();
            let at = rng.random_range(0..=parts.len());
            parts.insert(at, format!("The {thing} was hidden in {place} last winter."));
            let record = QaRecord::new(
                format!("syn-{i}"),
                parts.join(" "),
                format!("Where was the {thing} hidden?"),
                vec![place.to_string()],
            )
            .unwrap();
            Synthetic {
                record,
                answer: place.to_string(),
            }
        })
        .collect()
}

/// Mock scorer giving every word of the answer's occurrence score 10 and
/// everything else score 0.
pub fn answer_mock(s: &Synthetic) -> MockScorer {
    let start = s.record.context.find(&s.answer).unwrap();
    let end = start + s.answer.len();
    let mut pairs: Vec<(&str, f64)> = Vec::new();
    let mut offset = 0;
    for word in s.record.context.split_whitespace() {
        let ws = s.record.context[offset..].find(word).unwrap() + offset;
        offset = ws + word.len();
        if ws < end && ws + word.len() > start {
            pairs.push((word, 10.0));
        }
    }
    MockScorer::from_pairs(pairs).with_default(0.0)
}

/// Shuffled word soup; handy for property inputs.
pub fn word_soup(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut words: Vec<&str> = VERBS.iter().chain(THINGS).copied().collect();
    words.shuffle(rng);
    (0..n).map(|i| words[i % words.len()]).collect::<Vec<_>>().join(" ")
}
