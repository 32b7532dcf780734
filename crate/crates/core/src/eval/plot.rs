//! SVG charts for experiment reports.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

use super::{MrrTable, SweepReport};

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Bar chart of mean MRR per scorer.
pub fn mrr_bar_chart(table: &MrrTable, path: &Path) -> Result<()> {
    let names: Vec<String> = table.rows.iter().map(|r| r.scorer.clone()).collect();
    let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Mean MRR ({})", table.dataset_id), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d((0..names.len().max(1)).into_segmented(), 0.0..1.0f64)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .y_desc("MRR")
        .x_label_formatter(&|v| match v {
            SegmentValue::CenterOf(i) => names.get(*i).cloned().unwrap_or_default(),
            _ => String::new(),
        })
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(
            Histogram::vertical(&chart)
                .style(BLUE.mix(0.6).filled())
                .margin(12)
                .data(table.rows.iter().enumerate().map(|(i, r)| (i, r.mean_mrr))),
        )
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// Coverage and overlap-with-first against sigma.
pub fn sweep_line_chart(report: &SweepReport, path: &Path) -> Result<()> {
    let lo = report.rows.iter().map(|r| r.sigma).fold(f64::INFINITY, f64::min);
    let hi = report.rows.iter().map(|r| r.sigma).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("sigma sweep ({})", report.dataset_id), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(lo..hi, 0.0..1.05f64)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("sigma")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(LineSeries::new(report.rows.iter().map(|r| (r.sigma, r.coverage)), &BLUE))
        .map_err(|e| plot_err(path, e))?
        .label("information coverage")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    chart
        .draw_series(LineSeries::new(
            report.rows.iter().map(|r| (r.sigma, r.overlap_with_first)),
            &RED,
        ))
        .map_err(|e| plot_err(path, e))?
        .label("overlap with first sigma")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}
