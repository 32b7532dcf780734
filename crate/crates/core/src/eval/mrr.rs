use serde::{Deserialize, Serialize};

use crate::config::{LayerSelect, QaRecord};
use crate::error::{Error, Result};
use crate::scorer::{descending_ranks, AttentionRequest, RawScoreVector, Scorer};

use super::{find_case_insensitive, locate_answer_span, mean, EvalReport, Exclusion, Metric};

/// Mean reciprocal rank of one answer span, from 1-based ranks.
pub fn mrr_single(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::InvalidInput("mrr of an empty rank list".into()));
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    if sorted[0] == 0 || sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!(
            "ranks must be distinct and 1-based, got {ranks:?}"
        )));
    }
    let sum: f64 = ranks.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(sum / ranks.len() as f64)
}

/// Ranks of the answer tokens within `raw`, descending by score.
pub fn answer_ranks(context: &str, answer: &str, raw: &RawScoreVector) -> Result<Vec<usize>> {
    let span = locate_answer_span(context, answer, &raw.token_spans)?;
    let ranks = descending_ranks(&raw.scores);
    Ok(span.positions().map(|i| ranks[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrRow {
    pub scorer: String,
    pub mean_mrr: f64,
    pub n_records: usize,
    /// Set when the scorer failed outright.
    pub error: Option<String>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrTable {
    pub dataset_id: String,
    pub rows: Vec<MrrRow>,
    /// Records whose answer is not a context substring.
    pub excluded: Vec<Exclusion>,
}

impl MrrTable {
    pub fn row(&self, scorer: &str) -> Option<&MrrRow> {
        self.rows.iter().find(|r| r.scorer == scorer)
    }
}

/// First gold answer that occurs verbatim (case-insensitively) in the context.
fn usable_answer(record: &QaRecord) -> Option<&str> {
    record
        .answers
        .iter()
        .map(|a| a.trim())
        .find(|a| !a.is_empty() && find_case_insensitive(&record.context, a).is_some())
}

/// Scores every record with every scorer and averages per-record MRR.
///
/// Records whose answer does not occur in the context are excluded once, for
/// all scorers. A scorer that fails on a record gets an error row and the
/// remaining scorers still run.
pub fn mrr_experiment(
    dataset_id: &str,
    records: &[QaRecord],
    scorers: &[&dyn Scorer],
    layers: &LayerSelect,
) -> MrrTable {
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for r in records {
        match usable_answer(r) {
            Some(a) => kept.push((r, a)),
            None => {
                log::warn!("record {}: no answer occurs in the context; excluded", r.id);
                excluded.push(Exclusion {
                    id: r.id.clone(),
                    reason: "answer is not a context substring".into(),
                });
            }
        }
    }
    let rows = scorers
        .iter()
        .map(|scorer| {
            let mut report = EvalReport::new(dataset_id, Metric::Mrr, scorer.name());
            report.normalization = "ranks descending, ties to earlier token".into();
            let outcome: Result<()> = kept.iter().try_for_each(|(r, answer)| {
                let req = AttentionRequest::new(&r.context, &r.query).with_target(Some(answer));
                let raw = scorer.score(&req, layers)?;
                let ranks = answer_ranks(&r.context, answer, &raw)?;
                report.push(r.id.clone(), mrr_single(&ranks)?);
                Ok(())
            });
            let error = outcome.err().map(|e| {
                log::error!("scorer {} failed: {e}", scorer.name());
                e.to_string()
            });
            MrrRow {
                scorer: scorer.name(),
                mean_mrr: mean(&report.per_example),
                n_records: report.per_example.len(),
                error,
                report,
            }
        })
        .collect();
    MrrTable {
        dataset_id: dataset_id.to_string(),
        rows,
        excluded,
    }
}
