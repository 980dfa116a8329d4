//! Report files: a bucket table as CSV and a JSON sidecar describing it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BucketRow, BucketSpec, GroupReport, OutcomeMetric};
use crate::error::{Error, Result};
use crate::recommenders::Algorithm;

const HEADER: [&str; 4] = ["bucket", "mean_factor", "mean_outcome", "user_count"];
const MISSING: &str = "n/a";

/// Provenance written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub algorithm: Algorithm,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSidecar {
    pub spec: BucketSpec,
    pub outcome_metric: OutcomeMetric,
    pub correlation: Option<f64>,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub tool_version: String,
    /// Buckets without any outcome, left out of the correlation.
    pub flagged_buckets: Vec<usize>,
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
pub fn write_report(report: &GroupReport, meta: &ReportMeta, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&csv_path)
        .map_err(|e| Error::csv(&csv_path, e))?;
    w.write_record(HEADER).map_err(|e| Error::csv(&csv_path, e))?;
    for row in &report.rows {
        w.write_record([
            row.bucket.to_string(),
            row.mean_factor.to_string(),
            row.mean_outcome.map_or_else(|| MISSING.to_string(), |v| v.to_string()),
            row.user_count.to_string(),
        ])
        .map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let sidecar = ReportSidecar {
        spec: report.spec,
        outcome_metric: report.outcome_metric,
        correlation: report.correlation,
        algorithm: meta.algorithm,
        seed: meta.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        flagged_buckets: report
            .rows
            .iter()
            .filter(|r| r.mean_outcome.is_none())
            .map(|r| r.bucket)
            .collect(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok([csv_path, json_path])
}

/// Reads a report written by [`write_report`].
pub fn read_report(dir: &Path, stem: &str) -> Result<(ReportSidecar, Vec<BucketRow>)> {
    let json_path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: ReportSidecar = serde_json::from_str(&text)?;

    let csv_path = dir.join(format!("{stem}.csv"));
    let mut r = csv::Reader::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    let header = r.headers().map_err(|e| Error::csv(&csv_path, e))?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::Parse {
            path: csv_path,
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::csv(&csv_path, e))?;
        let line = n + 2;
        let bad = |what: &str| Error::Parse {
            path: csv_path.clone(),
            line,
            message: format!("bad {what}"),
        };
        rows.push(BucketRow {
            bucket: record[0].parse().map_err(|_| bad("bucket"))?,
            mean_factor: record[1].parse().map_err(|_| bad("mean_factor"))?,
            mean_outcome: match &record[2] {
                MISSING => None,
                v => Some(v.parse().map_err(|_| bad("mean_outcome"))?),
            },
            user_count: record[3].parse().map_err(|_| bad("user_count"))?,
        });
    }
    Ok((sidecar, rows))
}
