//! Report files: JSON, a plain-text table and ROC point CSVs.

use std::fmt::Write as _;
use std::path::Path;

use autothorax_core::data::DatasetMode;
use autothorax_core::eval::{ExperimentReport, RocCurve};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Report plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: RunConfig,
    pub report: ExperimentReport,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing {
                what: "report",
                path: path.to_path_buf(),
            },
            _ => Error::io(path, e),
        })?;
        Self::from_json(&text, path)
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

/// Per-k summary table followed by the published rows for comparison.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let population = match report.mode {
        DatasetMode::SemiAutomated => "dataset1 (pneumothorax vs. no finding)",
        DatasetMode::FullyAutomated => "dataset2 (pneumothorax vs. all other)",
    };
    let _ = writeln!(out, "population: {population}");
    let _ = writeln!(
        out,
        "records: {} ({} positive, {} negative)",
        report.records, report.positives, report.negatives
    );
    let _ = writeln!(
        out,
        "method: {} on {}, {} folds, seed {}",
        report.method,
        report.feature_config.as_str(),
        report.folds,
        report.seed
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>6}  {:>13}  {:>13}  {:>13}  {:>10}",
        "k", "sens %", "spec %", "AUC %", "pooled AUC"
    );
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{:>6}  {:>13}  {:>13}  {:>13}  {:>10}",
            s.k,
            format!("{}±{}", pct(s.sensitivity_mean), pct(s.sensitivity_std)),
            format!("{}±{}", pct(s.specificity_mean), pct(s.specificity_std)),
            format!("{}±{}", pct(s.auc_mean), pct(s.auc_std)),
            pct(s.pooled.auc),
        );
    }
    if report.per_fold.iter().any(|r| r.truncated) {
        let _ = writeln!(out, "note: some queries had fewer archive entries than k");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "published reference (full-scale data, not reproduced here):");
    let _ = writeln!(out, "{:<20} {:>6}  {:>6}  {:>6}  {:>5}", "method", "k", "sens", "spec", "AUC");
    for r in &report.references {
        let k = r.k.map_or_else(|| "-".to_string(), |k| k.to_string());
        let _ = writeln!(
            out,
            "{:<20} {:>6}  {:>6}  {:>6}  {:>5}",
            r.method, k, r.sensitivity, r.specificity, r.auc
        );
    }
    out
}

/// `fpr,tpr,threshold` rows in curve order; the sentinel threshold is `inf`.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr(), p.threshold);
    }
    out
}
