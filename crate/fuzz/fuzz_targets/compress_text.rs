#![no_main]

use libfuzzer_sys::fuzz_target;

use crossprune::{compress, CompressionConfig, QaRecord, RandomScorer, Strategy};

// Byte 0 picks tau and strategy, the rest is the context.
fuzz_target!(|data: &[u8]| {
    let Some((&knob, rest)) = data.split_first() else { return };
    let context = String::from_utf8_lossy(rest);
    let Ok(record) = QaRecord::new("f", context.as_ref(), "what?", vec![]) else { return };
    let strategy = [Strategy::Single, Strategy::Chunked1, Strategy::Chunked2][knob as usize % 3];
    let tau = f64::from(knob % 10 + 1) / 10.0;
    let cfg = CompressionConfig {
        chunk_size: 16,
        ..CompressionConfig::default()
    }
    .with_tau(tau)
    .with_strategy(strategy);
    let Ok(out) = compress(&record, &cfg, &RandomScorer::new(u64::from(knob))) else { return };
    assert!(out.retained_word_indices.windows(2).all(|w| w[0] < w[1]));
    assert!(out.retained_word_indices.iter().all(|&i| i < out.n_words));
    assert!(!out.retained_word_indices.is_empty());
    if strategy == Strategy::Single {
        assert_eq!(out.retained_word_indices.len(), cfg.target_count(out.n_words));
    }
});
