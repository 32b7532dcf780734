use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chunking::strategy2_word_scores;
use crate::config::{validate_config, CompressionConfig, QaRecord, Strategy};
use crate::error::{Error, Result};
use crate::pipeline::{self, compress, finish, provenance, request, WordScores};
use crate::scorer::Scorer;

use super::{information_coverage, mean};

pub const DEFAULT_SIGMAS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    /// Mean information coverage over records that have an answer.
    pub coverage: f64,
    /// Mean Jaccard overlap of retained sets with the first sigma.
    pub overlap_with_first: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset_id: String,
    pub config: CompressionConfig,
    pub scorer: String,
    pub rows: Vec<SweepRow>,
    /// `overlap[i][j]`: mean Jaccard overlap between sigma i and sigma j.
    pub overlap: Vec<Vec<f64>>,
    pub n_records: usize,
}

pub fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn coverage_of(record: &QaRecord, compressed: &str) -> Option<f64> {
    if record.answers.is_empty() {
        return None;
    }
    Some(
        record
            .answers
            .iter()
            .filter(|a| !a.trim().is_empty())
            .map(|a| information_coverage(compressed, a))
            .fold(0.0, f64::max),
    )
}

/// Compresses every record at each sigma and compares the outcomes.
pub fn sigma_sweep(
    dataset_id: &str,
    records: &[QaRecord],
    sigmas: &[f64],
    cfg: &CompressionConfig,
    scorer: &dyn Scorer,
) -> Result<SweepReport> {
    if sigmas.is_empty() {
        return Err(Error::InvalidInput("no sigma values to sweep".into()));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidConfig {
            field: "sigma",
            reason: format!("sweep values must be > 0, got {bad}"),
        });
    }
    let cfg = validate_config(cfg.clone())?;
    // retained[s][r]
    let mut retained: Vec<Vec<BTreeSet<usize>>> = vec![Vec::with_capacity(records.len()); sigmas.len()];
    let mut coverage: Vec<Vec<f64>> = vec![Vec::new(); sigmas.len()];
    for record in records {
        // Scores do not depend on sigma; compute them once where possible.
        let shared: Option<WordScores> = match cfg.strategy {
            Strategy::Single => {
                record.validate()?;
                let raw = scorer.score(&request(record, &record.context, scorer), &cfg.layer_select)?;
                Some(pipeline::word_scores_from_raw(&record.context, &raw)?)
            }
            Strategy::Chunked2 => Some(strategy2_word_scores(record, &cfg, scorer)?),
            Strategy::Chunked1 => None,
        };
        for (i, &sigma) in sigmas.iter().enumerate() {
            let c = cfg.clone().with_sigma(sigma);
            let result = match &shared {
                Some(ws) => finish(record, ws, &c, provenance(&c, scorer)),
                None => compress(record, &c, scorer)?,
            };
            if let Some(cov) = coverage_of(record, &result.compressed_text) {
                coverage[i].push(cov);
            }
            retained[i].push(result.retained_word_indices.into_iter().collect());
        }
    }
    let overlap: Vec<Vec<f64>> = (0..sigmas.len())
        .map(|i| {
            (0..sigmas.len())
                .map(|j| {
                    let per: Vec<f64> = retained[i]
                        .iter()
                        .zip(&retained[j])
                        .map(|(a, b)| jaccard(a, b))
                        .collect();
                    if per.is_empty() {
                        1.0
                    } else {
                        mean(&per)
                    }
                })
                .collect()
        })
        .collect();
    let rows = sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| SweepRow {
            sigma,
            coverage: mean(&coverage[i]),
            overlap_with_first: overlap[0][i],
        })
        .collect();
    Ok(SweepReport {
        dataset_id: dataset_id.to_string(),
        config: cfg,
        scorer: scorer.name(),
        rows,
        overlap,
        n_records: records.len(),
    })
}
