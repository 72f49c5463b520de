use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{DetectorError, DetectorName, DetectorSpec, Result};
use crate::forest::{Classifier, ForestConfig, RandomForest};
use crate::projections::{default_density, PcaModel, SrpModel};
use crate::rng;
use crate::scalar::Real;
use crate::tabular::{Dataset, EncodedMatrix, Encoder};

/// Hyperparameters for fitting a [`DetectorContext`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    pub forest: ForestConfig,
    pub dc_forest: ForestConfig,
    pub pca_retention: f64,
    /// SRP density; `1/sqrt(m)` when absent.
    pub srp_density: Option<f64>,
    pub seed: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            dc_forest: ForestConfig::default(),
            pca_retention: 0.8,
            srp_density: None,
            seed: 0,
        }
    }
}

impl ContextConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub detector: DetectorName,
    pub size: usize,
    pub level: f64,
}

/// Calibrated significance levels keyed by `(detector, sample size)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CalibratedLevels(BTreeMap<(DetectorName, usize), f64>);

impl CalibratedLevels {
    pub fn insert(&mut self, detector: DetectorName, size: usize, level: f64) {
        self.0.insert((detector, size), level);
    }

    pub fn get(&self, detector: DetectorName, size: usize) -> Option<f64> {
        self.0.get(&(detector, size)).copied()
    }

    pub fn entries(&self) -> Vec<LevelEntry> {
        self.0.iter().map(|(&(detector, size), &level)| LevelEntry { detector, size, level }).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &CalibratedLevels) {
        self.0.extend(other.0.iter().map(|(k, v)| (*k, *v)));
    }
}

impl Serialize for CalibratedLevels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CalibratedLevels {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<LevelEntry>::deserialize(d)?;
        Ok(Self(entries.into_iter().map(|e| ((e.detector, e.size), e.level)).collect()))
    }
}

/// Everything fitted on the training split that detectors need.
#[derive(Clone)]
pub struct DetectorContext<T: Real = f64> {
    pub encoder: Encoder,
    /// Primary model used by the model-based detectors.
    pub model: Option<Arc<dyn Classifier<T>>>,
    /// The fitted forest behind `model`, when it is one.
    pub forest: Option<Arc<RandomForest<T>>>,
    pub pca: PcaModel<T>,
    pub srp: SrpModel<T>,
    pub dc_config: ForestConfig,
    pub levels: CalibratedLevels,
    /// Label column of the training data, when it had one.
    pub label: Option<String>,
}

impl<T: Real> std::fmt::Debug for DetectorContext<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DetectorContext")
            .field("width", &self.encoder.width())
            .field("model", &self.model.as_ref().map(|m| m.n_classes()))
            .field("pca_dims", &self.pca.output_dim())
            .field("levels", &self.levels)
            .finish()
    }
}

impl<T: Real> DetectorContext<T> {
    /// Fit encoder, primary forest (when `train` is labeled with at least two
    /// classes present), PCA and a same-dimension SRP on `train`.
    pub fn fit(train: &Dataset, cfg: &ContextConfig) -> Result<Self> {
        let encoder = Encoder::fit(train)?;
        let x: EncodedMatrix<T> = encoder.encode(train)?;
        let forest = match train.labels() {
            Some(y) if y.iter().any(|&c| c != y[0]) => {
                let fc = cfg.forest.with_seed(rng::derive(cfg.seed, &[rng::tag("primary")]));
                Some(Arc::new(RandomForest::fit(x.values.view(), y, train.class_count(), &fc)?))
            }
            _ => None,
        };
        let pca = PcaModel::fit(x.values.view(), T::of(cfg.pca_retention))?;
        let m = encoder.width();
        let density = cfg.srp_density.unwrap_or_else(|| default_density(m));
        let srp = SrpModel::fit(m, pca.output_dim(), T::of(density), rng::derive(cfg.seed, &[rng::tag("srp")]))?;
        let dc_config = cfg.dc_forest.with_seed(rng::derive(cfg.seed, &[rng::tag("dc")]));
        let mut ctx = Self::from_parts(encoder, forest, pca, srp, dc_config);
        ctx.label = train.label_name().map(str::to_owned);
        Ok(ctx)
    }

    pub fn from_parts(
        encoder: Encoder,
        forest: Option<Arc<RandomForest<T>>>,
        pca: PcaModel<T>,
        srp: SrpModel<T>,
        dc_config: ForestConfig,
    ) -> Self {
        let model = forest.clone().map(|f| f as Arc<dyn Classifier<T>>);
        Self { encoder, model, forest, pca, srp, dc_config, levels: CalibratedLevels::default(), label: None }
    }

    /// Same context with a different primary model.
    pub fn with_model(&self, model: Arc<dyn Classifier<T>>) -> Self {
        Self { model: Some(model), ..self.clone() }
    }

    pub fn width(&self) -> usize {
        self.encoder.width()
    }

    pub fn model(&self) -> Result<&Arc<dyn Classifier<T>>> {
        let m = self.model.as_ref().ok_or_else(|| DetectorError::ModelMismatch("no primary model fitted".into()))?;
        if m.n_features() != self.width() {
            return Err(DetectorError::ModelMismatch(format!(
                "model expects {} features, encoder produces {}",
                m.n_features(),
                self.width()
            )));
        }
        Ok(m)
    }

    pub fn encode(&self, ds: &Dataset) -> Result<EncodedMatrix<T>> {
        Ok(self.encoder.encode(ds)?)
    }

    pub fn prepare(&self, ds: &Dataset) -> Result<PreparedSample<T>> {
        self.prepare_encoded(self.encode(ds)?.values)
    }

    /// Compute every view detectors use: features, probabilities (when a model
    /// exists) and both projections.
    pub fn prepare_encoded(&self, features: Array2<T>) -> Result<PreparedSample<T>> {
        let proba = match &self.model {
            Some(_) => Some(self.model()?.predict_proba(features.view())?),
            None => None,
        };
        self.prepare_with(features, proba)
    }

    /// As [`prepare_encoded`](Self::prepare_encoded) but with probabilities from `model`.
    pub fn prepare_with_model(&self, features: Array2<T>, model: &dyn Classifier<T>) -> Result<PreparedSample<T>> {
        let proba = model.predict_proba(features.view())?;
        self.prepare_with(features, Some(proba))
    }

    fn prepare_with(&self, features: Array2<T>, proba: Option<Array2<T>>) -> Result<PreparedSample<T>> {
        if features.ncols() != self.width() {
            return Err(DetectorError::WidthMismatch { expected: self.width(), found: features.ncols() });
        }
        let pca = self.pca.transform(features.view())?;
        let srp = self.srp.transform(features.view())?;
        Ok(PreparedSample { features, proba, pca, srp })
    }

    /// Level `p` is compared against under `spec` at `size`.
    pub fn level_for(&self, spec: &DetectorSpec, size: usize) -> Result<f64> {
        if !spec.adaptive {
            return Ok(spec.alpha);
        }
        self.levels.get(spec.name, size).ok_or_else(|| DetectorError::MissingCalibration {
            detector: spec.name.label().to_owned(),
            size,
        })
    }
}

const BUNDLE_FORMAT: &str = "driftbench-context";
const BUNDLE_VERSION: u32 = 1;

/// Serializable form of a context whose primary model is a forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub format: String,
    pub version: u32,
    pub encoder: Encoder,
    pub forest: Option<RandomForest<f64>>,
    pub pca: PcaModel<f64>,
    pub srp: SrpModel<f64>,
    pub dc_config: ForestConfig,
    pub levels: CalibratedLevels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl DetectorContext<f64> {
    pub fn to_bundle(&self) -> ContextBundle {
        ContextBundle {
            format: BUNDLE_FORMAT.to_owned(),
            version: BUNDLE_VERSION,
            encoder: self.encoder.clone(),
            forest: self.forest.as_deref().cloned(),
            pca: self.pca.clone(),
            srp: self.srp.clone(),
            dc_config: self.dc_config,
            levels: self.levels.clone(),
            label: self.label.clone(),
        }
    }

    pub fn from_bundle(bundle: ContextBundle) -> Result<Self> {
        if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
            return Err(DetectorError::ModelMismatch(format!(
                "expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}, found {} v{}",
                bundle.format, bundle.version
            )));
        }
        let width = bundle.encoder.width();
        if bundle.pca.input_dim() != width || bundle.srp.input_dim != width {
            return Err(DetectorError::ModelMismatch("projection widths differ from the encoder".into()));
        }
        let mut ctx = Self::from_parts(bundle.encoder, bundle.forest.map(Arc::new), bundle.pca, bundle.srp, bundle.dc_config);
        if ctx.model.is_some() {
            ctx.model()?;
        }
        ctx.levels = bundle.levels;
        ctx.label = bundle.label;
        Ok(ctx)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_bundle()).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ContextBundle =
            serde_json::from_str(text).map_err(|e| DetectorError::ModelMismatch(format!("malformed context file: {e}")))?;
        Self::from_bundle(bundle)
    }
}

/// Encoded rows together with their derived views.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSample<T: Real = f64> {
    pub features: Array2<T>,
    pub proba: Option<Array2<T>>,
    pub pca: Array2<T>,
    pub srp: Array2<T>,
}

impl<T: Real> PreparedSample<T> {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            proba: self.proba.as_ref().map(|p| p.select(Axis(0), rows)),
            pca: self.pca.select(Axis(0), rows),
            srp: self.srp.select(Axis(0), rows),
        }
    }

    /// Row-wise concatenation; all parts must share their views.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let cat = |views: Vec<ndarray::ArrayView2<'_, T>>| {
            ndarray::concatenate(Axis(0), &views).map_err(|e| DetectorError::InvalidArgument(format!("cannot stack samples: {e}")))
        };
        let proba = if parts.iter().all(|p| p.proba.is_some()) {
            Some(cat(parts.iter().map(|p| p.proba.as_ref().expect("checked").view()).collect())?)
        } else {
            None
        };
        Ok(Self {
            features: cat(parts.iter().map(|p| p.features.view()).collect())?,
            proba,
            pca: cat(parts.iter().map(|p| p.pca.view()).collect())?,
            srp: cat(parts.iter().map(|p| p.srp.view()).collect())?,
        })
    }

    pub(crate) fn proba(&self) -> Result<&Array2<T>> {
        self.proba.as_ref().ok_or_else(|| DetectorError::ModelMismatch("sample prepared without a primary model".into()))
    }
}
