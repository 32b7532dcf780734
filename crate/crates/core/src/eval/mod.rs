//! Evaluation metrics and experiments.

mod metrics;
mod mrr;
pub mod plot;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::config::CompressionConfig;

pub use metrics::{
    exact_match, find_case_insensitive, information_coverage, locate_answer_span,
    normalize_answer, AnswerSpan, EM_NORMALIZATION,
};
pub use mrr::{answer_ranks, mrr_experiment, mrr_single, MrrRow, MrrTable};
pub use sweep::{jaccard, sigma_sweep, SweepReport, SweepRow, DEFAULT_SIGMAS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[serde(rename = "em")]
    Em,
    InfoCoverage,
    #[serde(rename = "mrr")]
    Mrr,
}

/// A record left out of an evaluation, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub metric: Metric,
    /// Free-form tag, e.g. scorer name or tau; links reports from one run.
    pub label: String,
    pub example_ids: Vec<String>,
    pub per_example: Vec<f64>,
    pub aggregate: f64,
    pub normalization: String,
    pub config: Option<CompressionConfig>,
    /// Examples scored 0 because a step failed.
    pub failures: usize,
    pub excluded: Vec<Exclusion>,
}

impl EvalReport {
    pub fn new(dataset_id: impl Into<String>, metric: Metric, label: impl Into<String>) -> Self {
        EvalReport {
            dataset_id: dataset_id.into(),
            metric,
            label: label.into(),
            example_ids: Vec::new(),
            per_example: Vec::new(),
            aggregate: 0.0,
            normalization: String::new(),
            config: None,
            failures: 0,
            excluded: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, value: f64) {
        self.example_ids.push(id.into());
        self.per_example.push(value);
        self.aggregate = mean(&self.per_example);
    }

    pub fn with_config(mut self, cfg: &CompressionConfig) -> Self {
        self.config = Some(cfg.clone());
        self
    }
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
