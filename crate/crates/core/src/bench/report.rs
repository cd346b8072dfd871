use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;

use super::suite::MetricsReport;
use super::technique::Category;
use crate::Result;

pub const REPORT_COLUMNS: [&str; 13] = [
    "id",
    "category",
    "f1_mean",
    "f1_std",
    "precision_mean",
    "precision_std",
    "recall_mean",
    "recall_std",
    "accuracy_mean",
    "accuracy_std",
    "vmr_f1",
    "pct_improvement_f1",
    "inference_ms",
];

const RUN_COLUMNS: [&str; 11] = [
    "technique",
    "run",
    "seed",
    "f1",
    "precision",
    "recall",
    "accuracy",
    "inference_ms",
    "train_ms",
    "train_rows",
    "n_trees",
];

#[derive(Serialize)]
struct Fig3Entry {
    pct_improvement: f64,
    inference_ms: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `report.csv`, `runs.csv`, `fig2.json`, `fig3.json`, `fig4.json`
/// and `summary.json` into `out_dir`, returning the paths written.
pub fn emit_report(report: &MetricsReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let path = |name: &str| out_dir.join(name);

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path("report.csv"))?;
    w.write_record(REPORT_COLUMNS)?;
    for t in &report.techniques {
        w.write_record([
            t.id.clone(),
            t.category.to_string(),
            t.f1.mean.to_string(),
            t.f1.std.to_string(),
            t.precision.mean.to_string(),
            t.precision.std.to_string(),
            t.recall.mean.to_string(),
            t.recall.std.to_string(),
            t.accuracy.mean.to_string(),
            t.accuracy.std.to_string(),
            t.vmr_f1.to_string(),
            t.pct_improvement_f1.to_string(),
            t.inference_ms_mean.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path("runs.csv"))?;
    w.write_record(RUN_COLUMNS)?;
    for r in &report.results {
        w.write_record([
            r.technique.clone(),
            r.run.to_string(),
            r.seed.to_string(),
            r.f1.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.accuracy.to_string(),
            (1e3 * r.inference_seconds).to_string(),
            (1e3 * r.train_seconds).to_string(),
            r.train_rows.to_string(),
            r.n_trees.to_string(),
        ])?;
    }
    w.flush()?;

    let fig2: IndexMap<&str, f64> = report
        .techniques
        .iter()
        .map(|t| (t.id.as_str(), t.f1.mean))
        .collect();
    write_json(&path("fig2.json"), &fig2)?;

    let fig3: IndexMap<&str, Fig3Entry> = report
        .techniques
        .iter()
        .map(|t| {
            (
                t.id.as_str(),
                Fig3Entry {
                    pct_improvement: t.pct_improvement_f1,
                    inference_ms: t.inference_ms_mean,
                },
            )
        })
        .collect();
    write_json(&path("fig3.json"), &fig3)?;

    let mut fig4: IndexMap<&str, f64> = IndexMap::new();
    let base = report.baseline();
    fig4.insert(base.id.as_str(), base.vmr_f1);
    for c in [Category::Pre, Category::In, Category::Post] {
        if let Some(t) = report.best_in(c) {
            fig4.insert(t.id.as_str(), t.vmr_f1);
        }
    }
    write_json(&path("fig4.json"), &fig4)?;
    write_json(&path("summary.json"), report)?;

    Ok([
        "report.csv",
        "runs.csv",
        "fig2.json",
        "fig3.json",
        "fig4.json",
        "summary.json",
    ]
    .into_iter()
    .map(path)
    .collect())
}
