use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, PipelineConfig};
use super::run::{run_pipeline, PipelineReport};
use crate::error::{Error, Result};
use crate::io::Manifest;
use crate::scoring::{format_table, TableRow};

/// Config key varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    MinDuration,
    Aggregation,
    Algorithm,
    FilterOrder,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::MinDuration,
        SweepAxis::Aggregation,
        SweepAxis::Algorithm,
        SweepAxis::FilterOrder,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::MinDuration => "min_duration",
            SweepAxis::Aggregation => "aggregation",
            SweepAxis::Algorithm => "algorithm",
            SweepAxis::FilterOrder => "filter_order",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep axis {s:?}")))
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepAxis::MinDuration => &["0", "0.5", "1.0", "1.5"],
            SweepAxis::Aggregation => &["median", "mean"],
            SweepAxis::Algorithm => &["kmeans", "spectral", "xmeans", "dec_original", "dec_improved"],
            SweepAxis::FilterOrder => &["none", "2", "4", "8"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub runs: Vec<PipelineReport>,
}

impl SweepReport {
    /// Recall, error and unmerged recall per axis value.
    pub fn to_table(&self) -> String {
        let cols = self.values.clone();
        let row = |label: &str, f: fn(&PipelineReport) -> f64| TableRow {
            label: label.into(),
            values: self.runs.iter().map(|r| Some(f(r))).collect(),
        };
        let rows = [
            row("Recall", |r| r.aggregate.recall_pct),
            row("Error", |r| r.aggregate.error_pct),
            row("Unmerged recall", |r| r.aggregate.unmerged_recall_pct),
        ];
        let title = match (self.axis, self.runs.first()) {
            (SweepAxis::Algorithm, _) | (_, None) => format!("{} sweep", self.axis.key()),
            (_, Some(r)) => format!("{} sweep, {}", self.axis.key(), r.config.algorithm.name()),
        };
        format_table(&title, &cols, &rows)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }

    /// Aggregate recall of the run for `value`.
    pub fn recall(&self, value: &str) -> Option<f64> {
        let i = self.values.iter().position(|v| v == value)?;
        Some(self.runs[i].aggregate.recall_pct)
    }
}

/// One pipeline run per axis value, all from `base` with the same seed.
/// Each run writes under `out_dir/{key}={value}` when `out_dir` is given.
pub fn run_sweep(
    manifest: &Manifest,
    base: &PipelineConfig,
    axis: SweepAxis,
    values: &[String],
    out_dir: Option<&Path>,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        if axis == SweepAxis::Algorithm {
            Algorithm::parse(v)?;
        }
        let cfg = base.with_overrides(&[format!("{}={v}", axis.key())])?;
        let dir = out_dir.map(|d| d.join(format!("{}={v}", axis.key())));
        runs.push(run_pipeline(manifest, &cfg, dir.as_deref())?);
    }
    let report = SweepReport {
        axis,
        values: values.to_vec(),
        runs,
    };
    if let Some(dir) = out_dir {
        crate::io::write_text(dir.join("sweep.json"), &report.to_json_string())?;
        crate::io::write_text(dir.join("sweep.txt"), &report.to_table())?;
    }
    Ok(report)
}
