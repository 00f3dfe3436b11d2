//! Evaluation reports and their on-disk forms.
//!
//! A run emits, per method, a full [`EvalReport`] (JSON) and a pooled ROC
//! curve (CSV `fpr,tpr`), plus a combined `summary.csv` / `summary.json`
//! table of mean (std) per metric and a `manifest.json` describing the run.
//! Everything except the manifest timestamp is byte-identical across reruns
//! of the same seed and config.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-query values of one metric with their aggregate. `skipped` counts
/// queries on which the metric was undefined; they are excluded from
/// `per_query`, `mean` and `std`, never imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_query: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub skipped: usize,
}

/// Evaluation of one ranking method over all folds and queries.
///
/// `ra`/`auc`/`map`/`ndcg` are macro-averages over defined queries; `roc` is
/// the pooled (micro-average) curve, absent when the pool was one-class.
/// Supervised runs carry the chosen λ per outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub num_queries: usize,
    pub ra: MetricSummary,
    pub auc: MetricSummary,
    pub map: MetricSummary,
    pub ndcg: MetricSummary,
    pub roc: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_lambdas: Option<Vec<f64>>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        match name {
            "ra" => Some(&self.ra),
            "auc" => Some(&self.auc),
            "map" => Some(&self.map),
            "ndcg" => Some(&self.ndcg),
            _ => None,
        }
    }
}

/// Run provenance written next to the result tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that varies across
    /// identical reruns.
    pub created_unix: u64,
    pub seed: u64,
    pub kernel_sanitization: String,
    /// Echo of the effective configuration.
    pub config: serde_json::Value,
    /// True when any MCS provider entry hit its search budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcs_truncated: Option<bool>,
}

impl RunManifest {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            kernel_sanitization: "transductive-whole-matrix".to_string(),
            config,
            mcs_truncated: None,
        }
    }
}

const METRICS: [&str; 4] = ["ra", "auc", "map", "ndcg"];

fn summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("metric");
    for r in reports {
        out.push_str(&format!(",{m}_mean,{m}_std,{m}_skipped", m = r.method));
    }
    out.push('\n');
    for metric in METRICS {
        out.push_str(metric);
        for r in reports {
            let s = r.metric(metric).expect("known metric");
            out.push_str(&format!(",{},{},{}", s.mean, s.std, s.skipped));
        }
        out.push('\n');
    }
    out
}

fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the result files into `out_dir` (created if needed); returns the
/// paths written: `summary.csv`, `summary.json`, one `roc_<method>.csv` per
/// method with a curve, per-method `report_<method>.json`, `manifest.json`.
pub fn emit_report(
    reports: &[EvalReport],
    manifest: &RunManifest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::Data("no reports to emit".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    write(&path, &summary_csv(reports))?;
    written.push(path);

    let path = out_dir.join("summary.json");
    write(
        &path,
        &serde_json::to_string_pretty(&reports).expect("reports serialize"),
    )?;
    written.push(path);

    for report in reports {
        let path = out_dir.join(format!("report_{}.json", report.method));
        write(
            &path,
            &serde_json::to_string_pretty(report).expect("report serializes"),
        )?;
        written.push(path);
        if let Some(points) = &report.roc {
            let path = out_dir.join(format!("roc_{}.csv", report.method));
            write(&path, &roc_csv(points))?;
            written.push(path);
        }
    }

    let path = out_dir.join("manifest.json");
    write(
        &path,
        &serde_json::to_string_pretty(manifest).expect("manifest serializes"),
    )?;
    written.push(path);
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_summary(mean: f64) -> MetricSummary {
        MetricSummary {
            per_query: vec![mean],
            mean,
            std: 0.0,
            skipped: 1,
        }
    }

    fn dummy_report(method: &str) -> EvalReport {
        EvalReport {
            method: method.into(),
            num_queries: 2,
            ra: dummy_summary(0.75),
            auc: dummy_summary(0.8),
            map: dummy_summary(0.6),
            ndcg: dummy_summary(0.9),
            roc: Some(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]),
            chosen_lambdas: None,
        }
    }

    #[test]
    fn emit_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(7, serde_json::json!({"outer_folds": 4}));
        let reports = vec![dummy_report("unsupervised"), dummy_report("supervised")];
        let files = emit_report(&reports, &manifest, dir.path()).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in [
            "summary.csv",
            "summary.json",
            "report_unsupervised.json",
            "roc_unsupervised.csv",
            "report_supervised.json",
            "roc_supervised.csv",
            "manifest.json",
        ] {
            assert!(names.contains(&expected.to_string()), "missing {expected}");
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let header = summary.lines().next().unwrap();
        assert!(header.contains("unsupervised_mean") && header.contains("supervised_mean"));
        assert_eq!(summary.lines().count(), 5);

        let loaded = read_report(&dir.path().join("report_supervised.json")).unwrap();
        assert_eq!(loaded, reports[1]);
    }

    #[test]
    fn emit_rejects_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(0, serde_json::Value::Null);
        assert!(emit_report(&[], &manifest, dir.path()).is_err());
    }

    #[test]
    fn reruns_are_byte_identical_modulo_timestamp() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let reports = vec![dummy_report("unsupervised")];
        let mut m1 = RunManifest::new(7, serde_json::json!({"seed": 7}));
        let mut m2 = RunManifest::new(7, serde_json::json!({"seed": 7}));
        m1.created_unix = 0;
        m2.created_unix = 0;
        emit_report(&reports, &m1, dir_a.path()).unwrap();
        emit_report(&reports, &m2, dir_b.path()).unwrap();
        for name in ["summary.csv", "summary.json", "report_unsupervised.json", "manifest.json"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }
}
