//! Report files and the cross-model summary table.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, ErrorKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use soa_bench::SoaReport;
use std::path::Path;

pub const REPORT_SCHEMA: &str = "soa-bench-report/1";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Soa,
    Fid,
    Is,
    Rprec,
    Combined,
}

/// Content digest of one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(role: &str, path: &str, bytes: &[u8]) -> Self {
        InputDigest {
            role: role.to_string(),
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<M> {
    pub schema: String,
    pub kind: ReportKind,
    pub toolkit_version: String,
    pub model: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub metrics: M,
}

impl<M: Serialize> Report<M> {
    pub fn new(kind: ReportKind, config: &RunConfig, inputs: Vec<InputDigest>, metrics: M) -> Self {
        Report {
            schema: REPORT_SCHEMA.to_string(),
            kind,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            model: config.model.clone(),
            config: config.clone(),
            inputs,
            metrics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidMetrics {
    pub fid: f64,
    pub rows_a: usize,
    pub rows_b: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsMetrics {
    pub is_mean: f64,
    pub is_std: f64,
    pub splits: usize,
    pub rows: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RprecMetrics {
    pub r_precision: f64,
    pub images: usize,
    pub captions: usize,
    pub distractors: usize,
    pub top_k: usize,
    pub seed: u64,
}

/// One model's line in the summary table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub is_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub is_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_c_top40: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_top40: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_c_bot40: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soa_iou_bot40: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub rows: Vec<SummaryRow>,
}

/// Parses a metric report, checking the schema before anything else.
pub fn parse_report(text: &str, path: &Path) -> CliResult<Report<serde_json::Value>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("report is not JSON: {e}")).at(path.display()))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(REPORT_SCHEMA) => {}
        found => {
            return Err(CliError::new(
                ErrorKind::SchemaMismatch,
                format!("report schema {found:?} is not {REPORT_SCHEMA:?}"),
            )
            .at(path.display()))
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::input(format!("malformed report: {e}")).at(path.display()))
}

fn metrics<M: for<'de> Deserialize<'de>>(report: &Report<serde_json::Value>, path: &Path) -> CliResult<M> {
    serde_json::from_value(report.metrics.clone())
        .map_err(|e| CliError::input(format!("malformed {:?} metrics: {e}", report.kind)).at(path.display()))
}

/// Folds metric reports into one row per model, in order of first
/// appearance. A later report of the same kind for the same model wins.
pub fn summarize(reports: &[(std::path::PathBuf, Report<serde_json::Value>)]) -> CliResult<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(CliError::new(ErrorKind::EmptyInput, "no reports to combine"));
    }
    let mut rows: Vec<SummaryRow> = Vec::new();
    for (path, report) in reports {
        let idx = match rows.iter().position(|r| r.model == report.model) {
            Some(i) => i,
            None => {
                rows.push(SummaryRow {
                    model: report.model.clone(),
                    ..SummaryRow::default()
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[idx];
        match report.kind {
            ReportKind::Soa => {
                let m: SoaReport = metrics(report, path)?;
                row.soa_c = Some(m.soa_c);
                row.soa_i = Some(m.soa_i);
                row.soa_c_top40 = m.soa_c_top40;
                row.soa_c_bot40 = m.soa_c_bot40;
                row.soa_iou_c = m.soa_iou_c;
                row.soa_iou_i = m.soa_iou_i;
                row.soa_iou_top40 = m.soa_iou_top40;
                row.soa_iou_bot40 = m.soa_iou_bot40;
            }
            ReportKind::Fid => row.fid = Some(metrics::<FidMetrics>(report, path)?.fid),
            ReportKind::Is => {
                let m: IsMetrics = metrics(report, path)?;
                row.is_mean = Some(m.is_mean);
                row.is_std = Some(m.is_std);
            }
            ReportKind::Rprec => row.r_precision = Some(metrics::<RprecMetrics>(report, path)?.r_precision),
            ReportKind::Combined => {
                return Err(CliError::input("combined reports cannot be merged again").at(path.display()))
            }
        }
    }
    Ok(rows)
}

fn dash() -> String {
    "--".to_string()
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(dash, |v| format!("{:.2}", v * 100.0))
}

fn with_iou(recall: Option<f64>, iou: Option<f64>) -> String {
    format!("{} / {}", pct(recall), iou.map_or_else(dash, |v| format!("{v:.3}")))
}

/// Aligned text table; recall-like values in percent, IoU as a fraction,
/// missing values as `--`.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let header = [
        "Model",
        "IS",
        "FID",
        "R-prec",
        "SOA-C / IoU",
        "SOA-I / IoU",
        "Top40 / IoU",
        "Bot40 / IoU",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.model.clone(),
            match (r.is_mean, r.is_std) {
                (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
                (Some(m), None) => format!("{m:.2}"),
                _ => dash(),
            },
            r.fid.map_or_else(dash, |v| format!("{v:.2}")),
            pct(r.r_precision),
            with_iou(r.soa_c, r.soa_iou_c),
            with_iou(r.soa_i, r.soa_iou_i),
            with_iou(r.soa_c_top40, r.soa_iou_top40),
            with_iou(r.soa_c_bot40, r.soa_iou_bot40),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let pad = " ".repeat(widths[c] - cell.chars().count());
                if c == 0 {
                    format!("{cell}{pad}")
                } else {
                    format!("{pad}{cell}")
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
