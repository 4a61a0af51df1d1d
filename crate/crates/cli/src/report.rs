//! Best-fitness tables, confidence intervals across seeds and SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use robomorph::evolution::EvolutionTrace;
use serde::Serialize;

use crate::error::CliError;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Loads a trace that has at least one finished evolution.
pub fn load_trace(path: &Path) -> Result<EvolutionTrace, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim().is_empty() {
        return Err(CliError::data(format!("{}: trace is empty", path.display())));
    }
    let trace = EvolutionTrace::from_jsonl(&text)
        .map_err(|e| CliError::data(format!("{}:{}: {}", path.display(), e.line, e.reason)))?;
    if trace.summaries().all(|s| s.evolution == 0) {
        return Err(CliError::data(format!("{}: no finished evolutions", path.display())));
    }
    Ok(trace)
}

/// Best fitness after evolutions 1, 2, ...
pub fn best_series(trace: &EvolutionTrace) -> Vec<f64> {
    trace.summaries().filter(|s| s.evolution > 0).map(|s| s.best).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiRow {
    pub evolution: usize,
    pub n: usize,
    pub mean_best: f64,
    /// `Z_95 * s / sqrt(n)` with the sample standard deviation; absent for
    /// a single trace.
    pub ci_half_width: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Mean and normal-approximation interval per evolution over the series
/// that reach it.
pub fn ci_rows(series: &[Vec<f64>]) -> Vec<CiRow> {
    let longest = series.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let xs: Vec<f64> = series.iter().filter_map(|s| s.get(i).copied()).collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let half = (n > 1).then(|| {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                Z_95 * var.sqrt() / (n as f64).sqrt()
            });
            CiRow {
                evolution: i + 1,
                n,
                mean_best: mean,
                ci_half_width: half,
                ci_low: half.map(|h| mean - h),
                ci_high: half.map(|h| mean + h),
            }
        })
        .collect()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Writes `best.csv`, `best_ci.csv` and `best.svg` into `out_dir`.
pub fn write_report(traces: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if traces.is_empty() {
        return Err(CliError::config("report needs at least one trace"));
    }
    let loaded: Vec<EvolutionTrace> = traces.iter().map(|p| load_trace(p)).collect::<Result<_, _>>()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let best_path = out_dir.join("best.csv");
    let mut w = csv::Writer::from_path(&best_path).map_err(csv_err(&best_path))?;
    w.write_record(["trace", "evolution", "best", "mean", "evaluated", "corrupted"])
        .map_err(csv_err(&best_path))?;
    for (path, trace) in traces.iter().zip(&loaded) {
        for s in trace.summaries().filter(|s| s.evolution > 0) {
            w.write_record([
                path.display().to_string(),
                s.evolution.to_string(),
                s.best.to_string(),
                s.mean.map_or(String::new(), |m| m.to_string()),
                s.evaluated.to_string(),
                s.corrupted.to_string(),
            ])
            .map_err(csv_err(&best_path))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&best_path, e))?;

    let series: Vec<Vec<f64>> = loaded.iter().map(best_series).collect();
    let rows = ci_rows(&series);
    let ci_path = out_dir.join("best_ci.csv");
    let mut w = csv::Writer::from_path(&ci_path).map_err(csv_err(&ci_path))?;
    for row in &rows {
        w.serialize(row).map_err(csv_err(&ci_path))?;
    }
    w.flush().map_err(|e| CliError::io(&ci_path, e))?;

    let plot_path = out_dir.join("best.svg");
    plot(&plot_path, &series, &rows).map_err(|e| CliError::io(&plot_path, e))?;
    Ok(vec![best_path, ci_path, plot_path])
}

fn plot(path: &Path, series: &[Vec<f64>], rows: &[CiRow]) -> Result<(), Box<dyn std::error::Error>> {
    let values = series
        .iter()
        .flatten()
        .copied()
        .chain(rows.iter().filter_map(|r| r.ci_low))
        .chain(rows.iter().filter_map(|r| r.ci_high));
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let pad = ((hi - lo) * 0.1).max(0.05);
    let last = rows.len().max(2) as f64;

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Best fitness per evolution", ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(1.0..last, (lo - pad)..(hi + pad))?;
    chart
        .configure_mesh()
        .x_desc("evolution")
        .y_desc("best fitness (m/s)")
        .draw()?;
    for s in series {
        let points = s.iter().enumerate().map(|(i, &y)| ((i + 1) as f64, y));
        chart.draw_series(LineSeries::new(points, BLUE.mix(0.35)))?;
    }
    if series.len() > 1 {
        let band: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.ci_high.map(|h| (r.evolution as f64, h)))
            .chain(rows.iter().rev().filter_map(|r| r.ci_low.map(|l| (r.evolution as f64, l))))
            .collect();
        chart.draw_series(std::iter::once(Polygon::new(band, RED.mix(0.15))))?;
        let mean = rows.iter().map(|r| (r.evolution as f64, r.mean_best));
        chart.draw_series(LineSeries::new(mean, RED.stroke_width(2)))?;
    }
    root.present()?;
    Ok(())
}
