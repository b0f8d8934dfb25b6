//! Per-dimension MSE and report rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{ScoreVector, SCORE_DIMS};
use crate::error::{Error, Result};
use crate::numkernel::exact_mean;
use crate::pooling::PoolingConfig;

pub const CSV_HEADER: &str = "integrity,collegiality,social_versatility,development_orientation,overall_hireability,mean";

/// Short column names used in human-readable tables.
pub const SHORT_NAMES: [&str; SCORE_DIMS] = ["Integr", "Colleg", "Soc", "Dev", "Hirea"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerDimension {
    pub integrity: f64,
    pub collegiality: f64,
    pub social_versatility: f64,
    pub development_orientation: f64,
    pub overall_hireability: f64,
}

impl PerDimension {
    pub fn from_array(v: [f64; SCORE_DIMS]) -> Self {
        PerDimension {
            integrity: v[0],
            collegiality: v[1],
            social_versatility: v[2],
            development_orientation: v[3],
            overall_hireability: v[4],
        }
    }

    pub fn to_array(&self) -> [f64; SCORE_DIMS] {
        [
            self.integrity,
            self.collegiality,
            self.social_versatility,
            self.development_orientation,
            self.overall_hireability,
        ]
    }

    /// Unweighted mean of the five values.
    pub fn mean(&self) -> f64 {
        exact_mean(&self.to_array()).expect("five values")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub split: String,
    pub subjects: usize,
    pub per_dimension: PerDimension,
    pub mean_mse: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Fully resolved configuration that produced the report.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    /// Subject ids held out by each fold, when the run used K-fold.
    #[serde(default)]
    pub folds: Option<Vec<Vec<String>>>,
    /// Wall-clock time; left empty by the library so reports stay
    /// bit-reproducible.
    #[serde(default)]
    pub elapsed_seconds: Option<f64>,
}

impl RunReport {
    pub fn from_per_dimension(split: impl Into<String>, subjects: usize, per_dimension: PerDimension) -> Self {
        RunReport {
            split: split.into(),
            subjects,
            mean_mse: per_dimension.mean(),
            per_dimension,
            seed: None,
            config: None,
            folds: None,
            elapsed_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.per_dimension.to_array();
        if !all.iter().chain(std::iter::once(&self.mean_mse)).all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("report for {} holds non-finite MSE", self.split)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("report: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let row: Vec<String> = self
            .per_dimension
            .to_array()
            .iter()
            .chain(std::iter::once(&self.mean_mse))
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
        out
    }

    /// Table with one row named after the split, four decimals.
    pub fn to_table(&self) -> String {
        render_table(&[(self.split.as_str(), self)])
    }
}

/// Per-dimension MSE over subjects: `(1/n) Σ (y - ŷ)²` for each dimension.
pub fn evaluate(predictions: &[ScoreVector], labels: &[ScoreVector], split: &str) -> Result<RunReport> {
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Data("cannot evaluate zero subjects".into()));
    }
    let mut per = [0.0; SCORE_DIMS];
    let mut sq = Vec::with_capacity(predictions.len());
    for (d, slot) in per.iter_mut().enumerate() {
        sq.clear();
        sq.extend(predictions.iter().zip(labels).map(|(p, y)| {
            let e = y[d] - p[d];
            e * e
        }));
        *slot = exact_mean(&sq).expect("non-empty");
    }
    let report = RunReport::from_per_dimension(split, predictions.len(), PerDimension::from_array(per));
    report.validate()?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" | "table" => Ok(ReportFormat::Human),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?} (human, json, csv)"))),
        }
    }
}

pub fn render_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Human => report.to_table(),
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    }
}

pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}

/// Several labelled reports as one per-dimension table.
pub fn render_table(rows: &[(&str, &RunReport)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("Method".len());
    let mut out = format!("{:<label_w$}", "Method");
    for name in SHORT_NAMES.iter().chain(std::iter::once(&"Mean")) {
        write!(out, "  {name:>6}").unwrap();
    }
    out.push('\n');
    for (label, r) in rows {
        write!(out, "{label:<label_w$}").unwrap();
        for v in r.per_dimension.to_array().iter().chain(std::iter::once(&r.mean_mse)) {
            write!(out, "  {v:>6.4}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// One cell of the pooling ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingRow {
    pub pooling: PoolingConfig,
    pub val_mse: f64,
    pub test_mse: Option<f64>,
}

/// Pooling ablation table: Video | Audio | Text | Val MSE | Test MSE.
pub fn render_pooling_table(rows: &[PoolingRow]) -> String {
    let mut out = format!(
        "{:<14} | {:<14} | {:<11} | {:>8} | {:>8}\n",
        "Video", "Audio", "Text", "Val MSE", "Test MSE"
    );
    for r in rows {
        let test = r.test_mse.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            out,
            "{:<14} | {:<14} | {:<11} | {:>8.4} | {:>8}",
            r.pooling.video.label(),
            r.pooling.audio.label(),
            "Last token",
            r.val_mse,
            test
        )
        .unwrap();
    }
    out
}
