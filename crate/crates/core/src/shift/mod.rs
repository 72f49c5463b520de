//! Shift simulators: prior shifts, Gaussian noise, black-box adversarial
//! attacks and selection-bias resampling, applied to a clean split.

mod adversarial;
mod noise;
mod prior;
mod selection;

pub use adversarial::{adversarial_boundary, adversarial_zoo, BoundaryBudget, ZooBudget};
pub use noise::{gaussian_noise, NoiseLevel};
pub use prior::{knock_out, only_one};
pub use selection::{feature_subsampling, joint_subsampling, over_sampling_interpolation, under_sampling_nearmiss3};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{Classifier, ForestError};
use crate::rng::Rng;
use crate::tabular::{Dataset, Encoder, TabularError};

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("shift needs class labels")]
    MissingLabels,
    #[error("shift needs at least one numeric feature")]
    NoNumericFeatures,
    #[error("adversarial shift needs a fitted primary model")]
    UnfittedModel,
    #[error("selection removed every row")]
    EmptyResult,
    #[error("class {class} keeps only {rows} row(s); interpolation needs 2")]
    ClassTooSmall { class: usize, rows: usize },
    #[error("invalid shift spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

pub type Result<T> = std::result::Result<T, ShiftError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShiftKind {
    KnockOut,
    OnlyOne,
    GaussianSmall,
    GaussianMedium,
    AdvZOO,
    AdvBoundary,
    JointSubsampling,
    Subsampling,
    UnderSampling,
    OverSampling,
    NoShift,
}

impl ShiftKind {
    /// The ten shift types, in table order.
    pub const TYPES: [ShiftKind; 10] = [
        ShiftKind::KnockOut,
        ShiftKind::OnlyOne,
        ShiftKind::GaussianSmall,
        ShiftKind::GaussianMedium,
        ShiftKind::AdvZOO,
        ShiftKind::AdvBoundary,
        ShiftKind::JointSubsampling,
        ShiftKind::Subsampling,
        ShiftKind::UnderSampling,
        ShiftKind::OverSampling,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ShiftKind::KnockOut => "Knock-Out",
            ShiftKind::OnlyOne => "Only-One",
            ShiftKind::GaussianSmall => "Small Gaussian",
            ShiftKind::GaussianMedium => "Medium Gaussian",
            ShiftKind::AdvZOO => "Adv. ZOO",
            ShiftKind::AdvBoundary => "Adv. Boundary",
            ShiftKind::JointSubsampling => "Joint Subsampling",
            ShiftKind::Subsampling => "Subsampling",
            ShiftKind::UnderSampling => "Under-sampling",
            ShiftKind::OverSampling => "Over-sampling",
            ShiftKind::NoShift => "No Shift",
        }
    }

    fn uses(&self) -> (bool, bool) {
        match self {
            ShiftKind::KnockOut | ShiftKind::AdvZOO | ShiftKind::AdvBoundary => (true, false),
            ShiftKind::UnderSampling | ShiftKind::OverSampling => (true, false),
            ShiftKind::GaussianSmall | ShiftKind::GaussianMedium => (true, true),
            ShiftKind::Subsampling => (false, true),
            ShiftKind::OnlyOne | ShiftKind::JointSubsampling | ShiftKind::NoShift => (false, false),
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ShiftKind {
    type Err = ShiftError;

    /// Accepts the enum name (`KnockOut`) or the table label (`Knock-Out`), any case.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        ShiftKind::TYPES
            .iter()
            .chain(std::iter::once(&ShiftKind::NoShift))
            .copied()
            .find(|k| k.label().eq_ignore_ascii_case(t) || format!("{k:?}").eq_ignore_ascii_case(t))
            .ok_or_else(|| ShiftError::InvalidSpec(format!("unknown shift kind `{s}`")))
    }
}

/// Optional overrides of simulator constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftExtra {
    /// Gaussian noise scale in units of feature σ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_tries: Option<usize>,
}

/// One parameterized shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<ShiftExtra>,
}

impl ShiftSpec {
    pub fn new(kind: ShiftKind, s: Option<f64>, f: Option<f64>) -> Self {
        Self { kind, s, f, seed: 0, extra: None }
    }

    pub fn no_shift() -> Self {
        Self::new(ShiftKind::NoShift, None, None)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_extra(self, extra: ShiftExtra) -> Self {
        Self { extra: Some(extra), ..self }
    }

    /// Parameters are present exactly where the kind uses them. `s` is
    /// optional for the resampling kinds (default 0.5) and `f` for
    /// subsampling (default 1).
    pub fn validate(&self) -> Result<()> {
        let (use_s, use_f) = self.kind.uses();
        for (name, v, used) in [("s", self.s, use_s), ("f", self.f, use_f)] {
            match v {
                Some(_) if !used => {
                    return Err(ShiftError::InvalidSpec(format!("{} takes no `{name}` parameter", self.kind)))
                }
                Some(x) if !(0.0..=1.0).contains(&x) => {
                    return Err(ShiftError::InvalidSpec(format!("`{name}` = {x} outside [0, 1]")))
                }
                _ => {}
            }
        }
        let needs_s = matches!(
            self.kind,
            ShiftKind::KnockOut | ShiftKind::GaussianSmall | ShiftKind::GaussianMedium | ShiftKind::AdvZOO | ShiftKind::AdvBoundary
        );
        let needs_f = matches!(self.kind, ShiftKind::GaussianSmall | ShiftKind::GaussianMedium);
        if needs_s && self.s.is_none() {
            return Err(ShiftError::InvalidSpec(format!("{} needs `s`", self.kind)));
        }
        if needs_f && self.f.is_none() {
            return Err(ShiftError::InvalidSpec(format!("{} needs `f`", self.kind)));
        }
        if self.kind == ShiftKind::KnockOut && self.s == Some(1.0) {
            return Err(ShiftError::InvalidSpec("Knock-Out needs s < 1".into()));
        }
        Ok(())
    }

    /// Short parameter description such as `s=0.5,f=1`.
    pub fn params_label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(s) = self.s {
            parts.push(format!("s={s}"));
        }
        if let Some(f) = self.f {
            parts.push(format!("f={f}"));
        }
        parts.join(",")
    }

    fn extra(&self) -> ShiftExtra {
        self.extra.clone().unwrap_or_default()
    }
}

/// The 19 parameterized drifts, grouped by type in table order.
pub fn catalog() -> Vec<ShiftSpec> {
    use ShiftKind::*;
    let mut v = vec![ShiftSpec::new(KnockOut, Some(0.25), None), ShiftSpec::new(KnockOut, Some(0.40), None)];
    v.push(ShiftSpec::new(OnlyOne, None, None));
    for kind in [GaussianSmall, GaussianMedium] {
        for (s, f) in [(0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)] {
            v.push(ShiftSpec::new(kind, Some(s), Some(f)));
        }
    }
    for kind in [AdvZOO, AdvBoundary] {
        v.push(ShiftSpec::new(kind, Some(0.25), None));
        v.push(ShiftSpec::new(kind, Some(0.50), None));
    }
    v.push(ShiftSpec::new(JointSubsampling, None, None));
    v.push(ShiftSpec::new(Subsampling, None, Some(1.0)));
    v.push(ShiftSpec::new(UnderSampling, Some(0.5), None));
    v.push(ShiftSpec::new(OverSampling, Some(0.5), None));
    v
}

/// Result of applying a shift.
///
/// `affected_rows` lists provenance ids of input rows that were modified,
/// removed or replaced (for attacks: every attempted row).
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOutcome {
    pub target: Dataset,
    pub applied: ShiftSpec,
    pub affected_rows: Vec<u64>,
    pub attack_failures: usize,
}

/// Fitted artifacts some shifts use. Without an encoder, one is fitted on the
/// input; adversarial kinds need `model`.
#[derive(Clone, Copy, Default)]
pub struct ShiftContext<'a> {
    pub encoder: Option<&'a Encoder>,
    pub model: Option<&'a dyn Classifier<f64>>,
    /// Encoded rows the boundary attack draws starting points from.
    pub pool: Option<&'a Array2<f64>>,
}

pub(crate) fn encoder_for(ctx: &ShiftContext<'_>, ds: &Dataset) -> Result<Encoder> {
    match ctx.encoder {
        Some(e) => Ok(e.clone()),
        None => Ok(Encoder::fit(ds)?),
    }
}

/// Uniform random subset of `count` elements of `0..n`, returned sorted.
pub fn choose_rows(n: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(count.min(n));
    idx.sort_unstable();
    idx
}

/// Sample standard deviation of the observed values of a numeric column.
pub(crate) fn column_sigma(ds: &Dataset, col: usize) -> f64 {
    let vals: Vec<f64> = ds.rows().iter().filter_map(|r| r[col].as_num()).collect();
    if vals.len() < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
}

pub(crate) fn floor_frac(x: f64, n: usize) -> usize {
    ((x * n as f64) + 1e-9).floor() as usize
}

/// Dispatch `spec` on `ds`.
pub fn apply(ds: &Dataset, spec: &ShiftSpec, ctx: &ShiftContext<'_>) -> Result<ShiftOutcome> {
    spec.validate()?;
    let extra = spec.extra();
    let seed = spec.seed;
    let mut out = match spec.kind {
        ShiftKind::NoShift => ShiftOutcome {
            target: ds.clone(),
            applied: spec.clone(),
            affected_rows: Vec::new(),
            attack_failures: 0,
        },
        ShiftKind::KnockOut => knock_out(ds, spec.s.expect("validated"), seed)?,
        ShiftKind::OnlyOne => only_one(ds, seed)?,
        ShiftKind::GaussianSmall | ShiftKind::GaussianMedium => {
            let level = match (extra.noise_scale, spec.kind) {
                (Some(c), _) => NoiseLevel::Custom(c),
                (None, ShiftKind::GaussianSmall) => NoiseLevel::Small,
                (None, _) => NoiseLevel::Medium,
            };
            gaussian_noise(ds, spec.s.expect("validated"), spec.f.expect("validated"), level, seed)?
        }
        ShiftKind::AdvZOO => {
            let model = ctx.model.ok_or(ShiftError::UnfittedModel)?;
            let d = encoder_for(ctx, ds)?.width();
            let mut budget = ZooBudget::for_width(d);
            budget.max_iters = extra.max_iters.unwrap_or(budget.max_iters);
            budget.step = extra.step.unwrap_or(budget.step);
            budget.max_l2 = extra.max_l2.unwrap_or(budget.max_l2);
            adversarial_zoo(ds, &encoder_for(ctx, ds)?, model, spec.s.expect("validated"), seed, &budget)?
        }
        ShiftKind::AdvBoundary => {
            let model = ctx.model.ok_or(ShiftError::UnfittedModel)?;
            let mut budget = BoundaryBudget::default();
            budget.max_steps = extra.max_steps.unwrap_or(budget.max_steps);
            budget.init_tries = extra.init_tries.unwrap_or(budget.init_tries);
            adversarial_boundary(ds, &encoder_for(ctx, ds)?, model, ctx.pool, spec.s.expect("validated"), seed, &budget)?
        }
        ShiftKind::JointSubsampling => {
            joint_subsampling(ds, &encoder_for(ctx, ds)?, seed, extra.gamma.unwrap_or(1.0))?
        }
        ShiftKind::Subsampling => {
            feature_subsampling(ds, spec.f.unwrap_or(1.0), seed, extra.p_low.unwrap_or(0.2))?
        }
        ShiftKind::UnderSampling => under_sampling_nearmiss3(
            ds,
            &encoder_for(ctx, ds)?,
            spec.s.unwrap_or(0.5),
            seed,
            extra.neighbors.unwrap_or(3),
        )?,
        ShiftKind::OverSampling => over_sampling_interpolation(
            ds,
            &encoder_for(ctx, ds)?,
            spec.s.unwrap_or(0.5),
            seed,
            extra.neighbors.unwrap_or(5),
        )?,
    };
    out.applied = spec.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_nineteen_valid_drifts() {
        let c = catalog();
        assert_eq!(c.len(), 19);
        for s in &c {
            s.validate().unwrap();
        }
        let types: std::collections::BTreeSet<ShiftKind> = c.iter().map(|s| s.kind).collect();
        assert_eq!(types.len(), 10);
    }

    #[test]
    fn spec_json_schema() {
        let s: ShiftSpec = serde_json::from_str(r#"{"kind":"GaussianMedium","s":1.0,"f":0.5,"seed":3}"#).unwrap();
        assert_eq!(s, ShiftSpec::new(ShiftKind::GaussianMedium, Some(1.0), Some(0.5)).with_seed(3));
        let back: ShiftSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let with_extra: ShiftSpec =
            serde_json::from_str(r#"{"kind":"AdvZOO","s":0.25,"seed":1,"extra":{"max_iters":10}}"#).unwrap();
        assert_eq!(with_extra.extra.unwrap().max_iters, Some(10));
        assert!(serde_json::from_str::<ShiftSpec>(r#"{"kind":"Rotate","seed":1}"#).is_err());
    }

    #[test]
    fn parameters_match_kind() {
        assert!(ShiftSpec::new(ShiftKind::NoShift, Some(0.5), None).validate().is_err());
        assert!(ShiftSpec::new(ShiftKind::KnockOut, None, None).validate().is_err());
        assert!(ShiftSpec::new(ShiftKind::GaussianSmall, Some(0.5), None).validate().is_err());
        assert!(ShiftSpec::new(ShiftKind::Subsampling, None, None).validate().is_ok());
        assert!(ShiftSpec::new(ShiftKind::KnockOut, Some(1.5), None).validate().is_err());
    }

    #[test]
    fn kind_parses_labels() {
        assert_eq!("knock-out".parse::<ShiftKind>().unwrap(), ShiftKind::KnockOut);
        assert_eq!("AdvZOO".parse::<ShiftKind>().unwrap(), ShiftKind::AdvZOO);
        assert!("bogus".parse::<ShiftKind>().is_err());
    }
}
