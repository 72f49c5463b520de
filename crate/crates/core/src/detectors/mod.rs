//! Base shift detectors, Bonferroni ensembles and dataset-adaptive
//! significance calibration.

mod bbsd;
mod calibrate;
mod context;
mod domain;
mod ensemble;
mod feature;

pub use bbsd::{detect_bbsdh, detect_bbsds};
pub use calibrate::{calibrate, calibrate_significance_level, Calibration};
pub use context::{CalibratedLevels, ContextBundle, ContextConfig, DetectorContext, LevelEntry, PreparedSample};
pub use domain::detect_dc;
pub use ensemble::{detect, detect_ensemble_pair, detect_suite};
pub use feature::{detect_test_pca, detect_test_srp, detect_test_x};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ForestError;
use crate::projections::ProjectionError;
use crate::stats::StatsError;
use crate::tabular::TabularError;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("empty sample")]
    EmptySample,
    #[error("feature width {found} does not match {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("primary model unavailable or incompatible: {0}")]
    ModelMismatch(String),
    #[error("domain classifier needs equal sample sizes, got {source_rows} and {target_rows}")]
    UnbalancedInput { source_rows: usize, target_rows: usize },
    #[error("domain classifier needs at least 4 rows per side, got {0}")]
    TooFewSamples(usize),
    #[error("no calibrated level for {detector} at size {size}")]
    MissingCalibration { detector: String, size: usize },
    #[error("need {needed} rows, only {available} available")]
    InsufficientRows { needed: usize, available: usize },
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// The nine detectors, labelled as in result tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorName {
    BBSDs,
    BBSDh,
    TestX,
    TestPca,
    TestSrp,
    DC,
    DCstar,
    BBSDsPlusX,
    BBSDsPlusDC,
}

impl DetectorName {
    pub const ALL: [DetectorName; 9] = [
        DetectorName::BBSDs,
        DetectorName::BBSDh,
        DetectorName::TestX,
        DetectorName::TestPca,
        DetectorName::TestSrp,
        DetectorName::DC,
        DetectorName::DCstar,
        DetectorName::BBSDsPlusX,
        DetectorName::BBSDsPlusDC,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            DetectorName::BBSDs => "BBSDs",
            DetectorName::BBSDh => "BBSDh",
            DetectorName::TestX => "Test_X",
            DetectorName::TestPca => "Test_PCA",
            DetectorName::TestSrp => "Test_SRP",
            DetectorName::DC => "DC",
            DetectorName::DCstar => "DC*",
            DetectorName::BBSDsPlusX => "BBSDs+X",
            DetectorName::BBSDsPlusDC => "BBSDs+DC",
        }
    }

    /// Member detectors of a pair ensemble.
    pub fn members(&self) -> Option<(DetectorName, DetectorName)> {
        match self {
            DetectorName::BBSDsPlusX => Some((DetectorName::BBSDs, DetectorName::TestX)),
            DetectorName::BBSDsPlusDC => Some((DetectorName::BBSDs, DetectorName::DC)),
            _ => None,
        }
    }

    pub fn uses_model(&self) -> bool {
        matches!(
            self,
            DetectorName::BBSDs | DetectorName::BBSDh | DetectorName::DCstar | DetectorName::BBSDsPlusX | DetectorName::BBSDsPlusDC
        )
    }

    pub fn uses_domain_classifier(&self) -> bool {
        matches!(self, DetectorName::DC | DetectorName::DCstar | DetectorName::BBSDsPlusDC)
    }
}

impl fmt::Display for DetectorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DetectorName {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        DetectorName::ALL
            .into_iter()
            .find(|d| d.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| DetectorError::UnknownDetector(s.to_owned()))
    }
}

impl Serialize for DetectorName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DetectorName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const ADAPT_SUFFIX: &str = " (adapt)";
pub const DEFAULT_ALPHA: f64 = 0.05;

/// A detector with its decision rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorSpec {
    pub name: DetectorName,
    pub adaptive: bool,
    pub alpha: f64,
}

impl DetectorSpec {
    pub fn new(name: DetectorName, adaptive: bool) -> Self {
        Self { name, adaptive, alpha: DEFAULT_ALPHA }
    }

    pub fn fixed(name: DetectorName) -> Self {
        Self::new(name, false)
    }

    pub fn adaptive(name: DetectorName) -> Self {
        Self::new(name, true)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DetectorError::InvalidArgument(format!("alpha = {alpha} outside (0, 1)")));
        }
        Ok(Self { alpha, ..self })
    }

    /// Table label, with the adaptive suffix when calibrated.
    pub fn label(&self) -> String {
        if self.adaptive {
            format!("{}{ADAPT_SUFFIX}", self.name.label())
        } else {
            self.name.label().to_owned()
        }
    }

    /// Every detector, fixed then adaptive.
    pub fn all() -> Vec<DetectorSpec> {
        let mut v: Vec<_> = DetectorName::ALL.iter().map(|&n| Self::fixed(n)).collect();
        v.extend(DetectorName::ALL.iter().map(|&n| Self::adaptive(n)));
        v
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for DetectorSpec {
    type Err = DetectorError;

    /// Accepts a table label, optionally followed by ` (adapt)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        match lower.strip_suffix(ADAPT_SUFFIX) {
            Some(stem) => Ok(Self::adaptive(t[..stem.len()].parse()?)),
            None => Ok(Self::fixed(t.parse()?)),
        }
    }
}

impl Serialize for DetectorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for DetectorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of one detection.
///
/// `level` is what `p_value` is compared against: `alpha` for fixed
/// detectors (the aggregated Bonferroni p equals each component tested at
/// `alpha / k'`, recorded as `per_test_level`), or the calibrated level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detector: String,
    pub adaptive: bool,
    pub p_value: f64,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_test_level: Option<f64>,
    pub detected: bool,
    /// Per-feature, per-class or per-member p-values.
    pub components: Vec<f64>,
    /// Number of non-degenerate components entering the correction.
    pub tests: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc_accuracy: Option<f64>,
}

/// Strict `p < level`.
pub fn detection_decision(p: f64, level: f64) -> bool {
    p < level
}

/// Base outcome before a decision rule is applied.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RawOutcome {
    pub p_value: f64,
    pub components: Vec<f64>,
    pub tests: usize,
    pub dc_accuracy: Option<f64>,
}

impl RawOutcome {
    pub(crate) fn decide(&self, spec: &DetectorSpec, level: f64) -> DetectionResult {
        DetectionResult {
            detector: spec.label(),
            adaptive: spec.adaptive,
            p_value: self.p_value,
            level,
            per_test_level: (!spec.adaptive && self.tests > 0).then(|| spec.alpha / self.tests as f64),
            detected: detection_decision(self.p_value, level),
            components: self.components.clone(),
            tests: self.tests,
            dc_accuracy: self.dc_accuracy,
        }
    }
}
