//! Query-aware extractive context compression.
//!
//! Context tokens are scored by the cross-attention an encoder-decoder model
//! pays to them at the first decoding step, summed into whitespace words,
//! smoothed with a Gaussian over word positions, and the top fraction of
//! words is kept in original order.
//!
//! ```
//! use crossprune::{compress, CompressionConfig, MockScorer, QaRecord};
//!
//! let record = QaRecord::new("1", "the thief hid in a barn", "where?", vec![]).unwrap();
//! let scorer = MockScorer::from_pairs([("barn", 1.0)]).with_default(0.0);
//! let out = compress(&record, &CompressionConfig::default().with_tau(0.5), &scorer).unwrap();
//! assert!(out.compressed_text.contains("barn"));
//! ```

pub mod chunking;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod scorer;
pub mod segmenter;

pub use config::{
    validate_config, ChunkSoftmax, CompressionConfig, CompressionResult, LayerSelect, QaRecord,
    Strategy,
};
pub use error::{Error, Result};
pub use pipeline::compress;
pub use scorer::{MockScorer, RandomScorer, Scorer, ScorerKind};
