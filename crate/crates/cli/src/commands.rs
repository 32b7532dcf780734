//! One function per subcommand.

use std::fs::File;
use std::io::{self, Write};

use rayon::prelude::*;

use crossprune::dataset::{self, load_jsonl, OutputRecord};
use crossprune::eval::{self, plot, EvalReport, Exclusion, Metric};
use crossprune::llm::{compare_downstream, LlmClient};
use crossprune::scorer::manifest::check_artifacts;
use crossprune::scorer::ScorerFactory;
use crossprune::{compress, CompressionConfig, CompressionResult, QaRecord, ScorerKind};

use crate::args::{EvaluateArgs, ExportArgs, MetricArg, MrrArgs, SweepArgs};
use crate::failure::Failure;
use crate::settings::{self, Settings, SettingsFile};

const BATCH: usize = 256;

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::runtime("io", e.to_string()))
}

/// Compresses a batch in parallel, one scorer per worker, keeping input order.
fn compress_batch(
    pool: &rayon::ThreadPool,
    factory: &ScorerFactory,
    cfg: &CompressionConfig,
    batch: &[QaRecord],
) -> Vec<crossprune::Result<CompressionResult>> {
    pool.install(|| {
        batch
            .par_iter()
            .map_init(
                || factory.build(),
                |scorer, r| match scorer {
                    Ok(s) => compress(r, cfg, s.as_ref()),
                    Err(e) => Err(crossprune::Error::ScorerNotConfigured(e.to_string())),
                },
            )
            .collect()
    })
}

fn open_output(s: &Settings) -> Result<Box<dyn Write>, Failure> {
    match &s.output {
        Some(p) => File::create(p)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| crossprune::Error::io(p, e).into()),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_all(s: &Settings, items: Vec<OutputRecord>) -> Result<(), Failure> {
    dataset::write_results(open_output(s)?, items)?;
    Ok(())
}

fn report_rejections(s: &Settings, rejected: &[dataset::Rejection]) {
    if !rejected.is_empty() {
        eprintln!(
            "warning: {} skipped {} malformed line(s); first at line {}",
            s.input.display(),
            rejected.len(),
            rejected[0].line
        );
    }
}

fn load_all(s: &Settings) -> Result<Vec<QaRecord>, Failure> {
    let mut stream = load_jsonl(&s.input, s.fields.clone(), s.strict)?;
    let records = stream.by_ref().collect::<crossprune::Result<Vec<_>>>()?;
    report_rejections(s, stream.rejected());
    if records.is_empty() {
        return Err(Failure::runtime("dataset", format!("{}: no usable records", s.input.display())));
    }
    Ok(records)
}

pub fn compress_cmd(s: &Settings) -> Result<(), Failure> {
    let factory = s.factory(s.scorer)?;
    let pool = pool(s.jobs)?;
    let mut stream = load_jsonl(&s.input, s.fields.clone(), s.strict)?;
    let mut out = io::BufWriter::new(open_output(s)?);
    let mut failed = 0usize;
    let mut written = 0usize;
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        for item in stream.by_ref().take(BATCH) {
            batch.push(item?);
        }
        if batch.is_empty() {
            break;
        }
        let mut ok = Vec::with_capacity(batch.len());
        for (r, res) in batch.iter().zip(compress_batch(&pool, &factory, &s.compression, &batch)) {
            match res {
                Ok(c) => ok.push(OutputRecord::CompressionResult(c)),
                Err(e) => {
                    failed += 1;
                    eprintln!("error[{}]: record {}: {e}", e.kind(), r.id);
                }
            }
        }
        written += dataset::write_results(&mut out, ok)?;
    }
    out.flush().map_err(|e| crossprune::Error::PartialWrite { written, source: e })?;
    report_rejections(s, stream.rejected());
    log::info!("compressed {written} record(s), {failed} failed");
    if failed > 0 {
        return Err(Failure::runtime("input", format!("{failed} record(s) failed to compress")));
    }
    Ok(())
}

fn coverage_report(
    s: &Settings,
    pool: &rayon::ThreadPool,
    factory: &ScorerFactory,
    cfg: &CompressionConfig,
    records: &[QaRecord],
) -> EvalReport {
    let mut report = EvalReport::new(s.dataset_id(), Metric::InfoCoverage, format!("coverage tau={}", cfg.tau))
        .with_config(cfg);
    report.normalization = "case-insensitive substring of normalized answer".into();
    for (r, res) in records.iter().zip(compress_batch(pool, factory, cfg, records)) {
        if r.answers.is_empty() {
            report.excluded.push(Exclusion {
                id: r.id.clone(),
                reason: "no gold answer".into(),
            });
            continue;
        }
        match res {
            Ok(c) => {
                let best = r
                    .answers
                    .iter()
                    .map(|a| eval::information_coverage(&c.compressed_text, a))
                    .fold(0.0, f64::max);
                report.push(r.id.clone(), best);
            }
            Err(e) => {
                report.push(r.id.clone(), 0.0);
                report.failures += 1;
                report.excluded.push(Exclusion {
                    id: r.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    report
}

pub fn evaluate(file: &SettingsFile, s: &Settings, a: &EvaluateArgs) -> Result<(), Failure> {
    let cfgs = if a.taus.is_empty() {
        vec![s.compression.clone()]
    } else {
        a.taus
            .iter()
            .map(|&t| crossprune::config::validate_config(s.compression.clone().with_tau(t)))
            .collect::<crossprune::Result<Vec<_>>>()
            .map_err(Failure::from_config)?
    };
    let want_em = matches!(a.metric, MetricArg::Em | MetricArg::Both);
    let client = if want_em {
        let ep = settings::endpoint(file, a.endpoint.as_deref())?;
        Some(LlmClient::new(ep).map_err(|e| Failure::usage(e.to_string()))?)
    } else {
        None
    };
    let factory = s.factory(s.scorer)?;
    let records = load_all(s)?;
    let mut out = Vec::new();
    if matches!(a.metric, MetricArg::Coverage | MetricArg::Both) {
        let pool = pool(s.jobs)?;
        for cfg in &cfgs {
            out.push(OutputRecord::EvalReport(coverage_report(s, &pool, &factory, cfg, &records)));
        }
    }
    if let Some(client) = &client {
        let scorer = factory.build()?;
        for d in compare_downstream(&s.dataset_id(), &records, &cfgs, client, scorer.as_ref()) {
            if d.report.failures > 0 {
                eprintln!("warning: {} of {} request(s) failed", d.report.failures, records.len());
            }
            out.push(OutputRecord::EvalReport(d.report));
        }
    }
    write_all(s, out)
}

/// Factories for every requested scorer; model-backed kinds share one load.
fn factories(s: &Settings, names: &[String]) -> Result<Vec<ScorerFactory>, Failure> {
    let mut shared: Option<ScorerFactory> = None;
    let mut out = Vec::new();
    for name in names {
        let kind = ScorerKind::parse(name.trim(), s.seed).map_err(Failure::usage)?;
        let f = match kind {
            ScorerKind::Mock | ScorerKind::Random { .. } => s.factory(kind)?,
            _ => match &shared {
                Some(base) => base.with_kind(kind)?,
                None => {
                    let f = s.factory(kind)?;
                    shared = Some(f.clone());
                    f
                }
            },
        };
        out.push(f);
    }
    Ok(out)
}

pub fn mrr(s: &Settings, a: &MrrArgs) -> Result<(), Failure> {
    if a.scorers.is_empty() {
        return Err(Failure::usage("--scorers is empty"));
    }
    let built = factories(s, &a.scorers)?
        .iter()
        .map(ScorerFactory::build)
        .collect::<crossprune::Result<Vec<_>>>()?;
    let records = load_all(s)?;
    let refs: Vec<&dyn crossprune::Scorer> = built.iter().map(|b| b.as_ref()).collect();
    let table = eval::mrr_experiment(&s.dataset_id(), &records, &refs, &s.compression.layer_select);
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("warning: scorer {}: {}", row.scorer, row.error.as_deref().unwrap_or_default());
    }
    if let Some(p) = &a.csv {
        dataset::write_mrr_csv(&table, p)?;
    }
    if let Some(p) = &a.plot {
        plot::mrr_bar_chart(&table, p)?;
    }
    write_all(s, vec![OutputRecord::MrrTable(table)])
}

pub fn sweep(s: &Settings, a: &SweepArgs) -> Result<(), Failure> {
    let scorer = s.factory(s.scorer)?.build()?;
    let records = load_all(s)?;
    let report = eval::sigma_sweep(&s.dataset_id(), &records, &a.sigmas, &s.compression, scorer.as_ref())
        .map_err(Failure::from_config)?;
    if let Some(p) = &a.csv {
        dataset::write_sweep_csv(&report, p)?;
    }
    if let Some(p) = &a.plot {
        plot::sweep_line_chart(&report, p)?;
    }
    write_all(s, vec![OutputRecord::SweepReport(report)])
}

pub fn export_check(a: &ExportArgs) -> Result<(), Failure> {
    let check = check_artifacts(&a.model);
    let text = serde_json::to_string_pretty(&check).map_err(crossprune::Error::from)?;
    println!("{text}");
    if check.ok() {
        Ok(())
    } else {
        Err(Failure::runtime(
            "artifact",
            format!("{}: {} problem(s)", a.model.display(), check.problems.len()),
        ))
    }
}

