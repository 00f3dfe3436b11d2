//! JSON experiment configuration: the single-file alternative to CLI flags.
//!
//! Every field is optional except the input paths; missing fields take the
//! defaults documented on [`crate::cv::ExperimentConfig`]. CLI flags, when
//! given explicitly, override file values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cv::ExperimentConfig;
use crate::error::{Error, Result};
use crate::ranker::{SolverMode, SolverOptions};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SolverMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_threshold: Option<usize>,
}

impl SolverSpec {
    pub fn resolve(&self) -> SolverOptions {
        let defaults = SolverOptions::default();
        SolverOptions {
            mode: self.mode.unwrap_or(defaults.mode),
            cg_tol: self.cg_tol.unwrap_or(defaults.cg_tol),
            max_iters: self.max_iters.unwrap_or(defaults.max_iters),
            direct_threshold: self.direct_threshold.unwrap_or(defaults.direct_threshold),
        }
    }
}

/// On-disk experiment description (`--config run.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Raw similarity matrix CSV (sanitized on load).
    pub similarity: PathBuf,
    /// Label TSV.
    pub labels: PathBuf,
    /// Output directory for reports and curves.
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevance_threshold: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Resolve protocol parameters (paths stay with the caller); the result
    /// is validated.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let defaults = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            lambda_grid: self
                .lambda_grid
                .clone()
                .unwrap_or(defaults.lambda_grid),
            outer_folds: self.outer_folds.unwrap_or(defaults.outer_folds),
            inner_folds: self.inner_folds.unwrap_or(defaults.inner_folds),
            relevance_threshold: self
                .relevance_threshold
                .unwrap_or(defaults.relevance_threshold),
            seed: self.seed.unwrap_or(defaults.seed),
            solver: self.solver.as_ref().map(|s| s.resolve()).unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
