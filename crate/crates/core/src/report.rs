//! Run artifacts: the per-epoch metrics CSV and the cross-seed summary JSON.
//!
//! The CSV is the stable machine-readable record of a run. Its first line is
//! a format marker comment, the second the fixed column header; every row
//! after that is one epoch. Floats are printed with Rust's shortest
//! round-trip formatting, so identical metric values produce identical
//! bytes, which is what lets two runs of the same seed be compared by
//! diffing everything except the wall-clock column.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::train::{EpochRow, TrainReport};

/// First line of every metrics file; bump the suffix if columns ever change.
pub const METRICS_MARKER: &str = "# subadv-metrics-v1";

/// The fixed CSV column header.
pub const METRICS_HEADER: &str =
    "epoch,phase_vanilla,phase_adv,train_loss,vanilla_acc,robust_acc,prone_fraction,wall_ms";

/// Render epoch rows as the complete CSV text (marker, header, rows).
pub fn render_metrics_csv(rows: &[EpochRow]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_MARKER);
    out.push('\n');
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.phase_vanilla,
            r.phase_adv,
            r.train_loss,
            r.vanilla_acc,
            r.robust_acc,
            r.prone_fraction,
            r.wall_ms,
        ));
    }
    out
}

/// Write the metrics CSV for one run.
pub fn write_metrics_csv(path: &Path, rows: &[EpochRow]) -> Result<()> {
    fs::write(path, render_metrics_csv(rows))?;
    Ok(())
}

/// Final numbers of one seed's run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub final_vanilla_acc: f64,
    pub final_robust_acc: f64,
    pub total_wall_ms: f64,
    pub fallback_iterations: usize,
}

impl RunRecord {
    pub fn from_report(seed: u64, report: &TrainReport) -> RunRecord {
        RunRecord {
            seed,
            final_vanilla_acc: report.final_vanilla_acc,
            final_robust_acc: report.final_robust_acc,
            total_wall_ms: report.total_wall_ms,
            fallback_iterations: report.fallback_iterations,
        }
    }
}

/// Cross-seed aggregate: the per-seed records plus their arithmetic means.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub mode: String,
    pub runs: Vec<RunRecord>,
    pub mean_vanilla_acc: f64,
    pub mean_robust_acc: f64,
    pub mean_wall_ms: f64,
}

impl Summary {
    pub fn from_runs(mode: String, runs: Vec<RunRecord>) -> Result<Summary> {
        if runs.is_empty() {
            return Err(Error::InvalidConfig(
                "summary needs at least one run".into(),
            ));
        }
        let n = runs.len() as f64;
        let mean = |f: fn(&RunRecord) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Ok(Summary {
            mode,
            mean_vanilla_acc: mean(|r| r.final_vanilla_acc),
            mean_robust_acc: mean(|r| r.final_robust_acc),
            mean_wall_ms: mean(|r| r.total_wall_ms),
            runs,
        })
    }
}

/// Write the summary as pretty-printed JSON.
pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
