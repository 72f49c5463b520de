//! Experiment protocol: dataset sweeps over shifts, sizes and seeds, the
//! metric tables derived from them, detector comparison, the model-quality
//! experiment and the eigen-shift validation.

mod compare;
mod eigen;
mod metrics;
mod output;
mod quality;
mod run;
mod suite;

pub use compare::{compare_detectors, Comparison};
pub use eigen::{eigen_shift_experiment, EigenAnalysis, EigenRecord, EigenShiftResult};
pub use metrics::{aggregate, detection_decision, efficiency_score, AccuracyEntry, EfficiencyEntry, Summary, TprEntry};
pub use output::{render_tables, write_cells_csv, write_outputs, write_report_json, write_tables_md};
pub use quality::{model_quality_experiment, quality_to_corruption, QualityCell, QualityEntry, QualityReport};
pub use run::{run, BenchmarkReport, CellResult, LevelRecord, ShiftRun};
pub use suite::{balanced_binary, synthetic_suite};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{ContextConfig, DetectorError, DetectorSpec, DEFAULT_ALPHA};
use crate::forest::ForestError;
use crate::linalg::LinalgError;
use crate::shift::{catalog, ShiftError, ShiftSpec};
use crate::stats::StatsError;
use crate::tabular::{load_csv, make_synthetic, Dataset, SplitSpec, SyntheticSpec, TabularError};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("dataset `{dataset}`: {source}")]
    Load { dataset: String, source: TabularError },
    #[error("dataset `{dataset}`: {source}")]
    Setup { dataset: String, source: DetectorError },
    #[error("efficiency flags missing size {0}")]
    MissingSize(usize),
    #[error("no prior shift along the minimum eigenvector keeps a valid distribution")]
    InfeasibleShift,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

pub type Result<T> = std::result::Result<T, BenchmarkError>;

/// A named dataset: a CSV file (with optional label column) or a synthetic spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetSource {
    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        Self { name: name.into(), csv: None, label: None, synthetic: Some(spec) }
    }

    pub fn csv(name: impl Into<String>, path: impl Into<PathBuf>, label: Option<String>) -> Self {
        Self { name: name.into(), csv: Some(path.into()), label, synthetic: None }
    }

    /// Relative CSV paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Dataset> {
        let err = |source| BenchmarkError::Load { dataset: self.name.clone(), source };
        match (&self.csv, &self.synthetic) {
            (Some(path), None) => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                load_csv(&path, self.label.as_deref()).map_err(err)
            }
            (None, Some(spec)) => make_synthetic(spec).map_err(err),
            _ => Err(BenchmarkError::InvalidPlan(format!("dataset `{}` needs exactly one of `csv` or `synthetic`", self.name))),
        }
    }
}

fn default_shifts() -> Vec<ShiftSpec> {
    let mut v = catalog();
    v.push(ShiftSpec::no_shift());
    v
}

fn default_sizes() -> Vec<usize> {
    vec![10, 100, 500, 1000, 2000]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_runs() -> usize {
    100
}

/// Full benchmark configuration, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_shifts")]
    pub shifts: Vec<ShiftSpec>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "DetectorSpec::all")]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Null runs per (detector, size) for adaptive levels.
    #[serde(default = "default_runs")]
    pub calibration_runs: usize,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory relative CSV paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn new(datasets: Vec<DatasetSource>) -> Self {
        Self {
            datasets,
            shifts: default_shifts(),
            sizes: default_sizes(),
            seeds: default_seeds(),
            detectors: DetectorSpec::all(),
            split: SplitSpec::default(),
            alpha: DEFAULT_ALPHA,
            calibration_runs: default_runs(),
            context: ContextConfig::default(),
            seed: 0,
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchmarkError::Io { path: path.to_owned(), source })?;
        let mut plan = Self::from_json(&text)?;
        plan.base_dir = path.parent().map(Path::to_owned);
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchmarkError::InvalidPlan(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        let names: BTreeSet<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        if names.len() != self.datasets.len() {
            return bad("dataset names must be unique".into());
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return bad("sizes must be positive and strictly ascending".into());
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s > self.split.source_size) {
            return bad(format!("size {s} exceeds the source split ({})", self.split.source_size));
        }
        if self.seeds.is_empty() || self.detectors.is_empty() || self.shifts.is_empty() {
            return bad("seeds, detectors and shifts must be non-empty".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.calibration_runs == 0 && self.detectors.iter().any(|d| d.adaptive) {
            return bad("adaptive detectors need calibration_runs >= 1".into());
        }
        for s in &self.shifts {
            s.validate()?;
        }
        self.context.forest.validate()?;
        self.context.dc_forest.validate()?;
        Ok(())
    }
}
