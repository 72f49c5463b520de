//! Random forest classifier (CART trees, Gini impurity, bootstrap bagging),
//! confusion matrices and label-noise perturbation.

mod confusion;
mod perturb;
mod tree;

pub use confusion::{accuracy, ConfusionMatrix};
pub use perturb::{perturb, PerturbedModel};
pub use tree::{Node, Tree};

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scalar::Real;
use tree::GrowParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("training set is empty or has fewer than two rows")]
    EmptyTrainingSet,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature width {found} does not match the model's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("true class {0} has no rows")]
    EmptyClassColumn(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, ForestError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubset {
    /// `max(1, floor(sqrt(m)))` candidate features per node.
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureSubset {
    pub fn count(&self, m: usize) -> usize {
        match *self {
            FeatureSubset::Sqrt => ((m as f64).sqrt().floor() as usize).max(1),
            FeatureSubset::All => m,
            FeatureSubset::Fixed(c) => c.clamp(1, m.max(1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidArgument("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidArgument("min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

/// Anything producing class-probability vectors for encoded rows.
pub trait Classifier<T: Real>: Send + Sync {
    fn n_classes(&self) -> usize;
    fn n_features(&self) -> usize;

    /// Probabilities for `row` (the `index`-th row of its batch) into `out`.
    fn predict_proba_row(&self, row: &[T], index: usize, out: &mut [T]);

    fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_width(self.n_features(), x.ncols())?;
        let k = self.n_classes();
        let mut out = Array2::<T>::zeros((x.nrows(), k));
        let mut buf = vec![T::zero(); x.ncols()];
        for (i, (row, mut dst)) in x.rows().into_iter().zip(out.rows_mut()).enumerate() {
            buf.iter_mut().zip(row.iter()).for_each(|(b, &v)| *b = v);
            let slice = dst.as_slice_mut().expect("standard layout");
            self.predict_proba_row(&buf, i, slice);
        }
        Ok(out)
    }

    fn predict(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.rows().into_iter().map(|r| argmax(r.as_slice().expect("row"))).collect())
    }

    fn confusion_matrix(&self, x: ArrayView2<'_, T>, y: &[usize]) -> Result<ConfusionMatrix<T>> {
        let pred = self.predict(x)?;
        ConfusionMatrix::from_predictions(&pred, y, self.n_classes())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ForestError::DimensionMismatch { expected, found });
    }
    Ok(())
}

const FORMAT_NAME: &str = "driftbench-forest";
const FORMAT_VERSION: u32 = 1;

/// Fitted random forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RandomForest<T: Real = f64> {
    format: String,
    version: u32,
    pub k: usize,
    pub feature_count: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree<T>>,
    /// Out-of-bag accuracy over rows left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

impl<T: Real> RandomForest<T> {
    /// Grow `cfg.n_trees` trees on `x` (`n x m`) with labels in `0..k`.
    pub fn fit(x: ArrayView2<'_, T>, y: &[usize], k: usize, cfg: &ForestConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, m) = x.dim();
        if n < 2 || y.len() != n || m == 0 {
            return Err(ForestError::EmptyTrainingSet);
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= k) {
            return Err(ForestError::InvalidArgument(format!("label {bad} >= k = {k}")));
        }
        if y.iter().all(|&c| c == y[0]) {
            return Err(ForestError::SingleClass);
        }
        let owned = x.as_standard_layout();
        let data = owned.as_slice().expect("standard layout");
        let params = GrowParams {
            k,
            mtry: cfg.features_per_split.count(m),
            max_depth: cfg.max_depth,
            min_samples_split: cfg.min_samples_split,
        };
        let grown: Vec<(Tree<T>, Vec<u32>)> = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::stream(cfg.seed, &[t as u64]);
                let (samples, oob) = if cfg.bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[r.random_range(0..n)] += 1;
                    }
                    let samples = (0..n as u32).filter(|&i| counts[i as usize] > 0).map(|i| (i, counts[i as usize])).collect();
                    let oob = (0..n as u32).filter(|&i| counts[i as usize] == 0).collect();
                    (samples, oob)
                } else {
                    ((0..n as u32).map(|i| (i, 1)).collect(), Vec::new())
                };
                (tree::grow(data, m, y, samples, &params, &mut r), oob)
            })
            .collect();

        let mut votes = vec![T::zero(); n * k];
        let mut seen = vec![false; n];
        for (tree, oob) in &grown {
            for &i in oob {
                let i = i as usize;
                let leaf = tree.leaf_for(&data[i * m..(i + 1) * m], k);
                for (v, &p) in votes[i * k..(i + 1) * k].iter_mut().zip(leaf) {
                    *v += p;
                }
                seen[i] = true;
            }
        }
        let scored: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        let oob_accuracy = (!scored.is_empty()).then(|| {
            let hits = scored.iter().filter(|&&i| argmax(&votes[i * k..(i + 1) * k]) == y[i]).count();
            hits as f64 / scored.len() as f64
        });

        Ok(Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            k,
            feature_count: m,
            config: *cfg,
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            oob_accuracy,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| ForestError::Format(e.to_string()))?;
        f.check_document()?;
        Ok(f)
    }

    pub(crate) fn check_document(&self) -> Result<()> {
        if self.format != FORMAT_NAME || self.version != FORMAT_VERSION {
            return Err(ForestError::Format(format!(
                "expected {FORMAT_NAME} v{FORMAT_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        for t in &self.trees {
            let leaves = t.leaf_probs.len() / self.k.max(1);
            for node in &t.nodes {
                let ok = if node.feature == tree::LEAF {
                    (node.left as usize) < leaves
                } else {
                    (node.feature as usize) < self.feature_count
                        && (node.left as usize) < t.nodes.len()
                        && (node.right as usize) < t.nodes.len()
                };
                if !ok {
                    return Err(ForestError::Format("tree references out of range".into()));
                }
            }
        }
        Ok(())
    }
}

impl<T: Real> Classifier<T> for RandomForest<T> {
    fn n_classes(&self) -> usize {
        self.k
    }

    fn n_features(&self) -> usize {
        self.feature_count
    }

    fn predict_proba_row(&self, row: &[T], _index: usize, out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for t in &self.trees {
            for (o, &p) in out.iter_mut().zip(t.leaf_for(row, self.k)) {
                *o += p;
            }
        }
        let n = T::of_usize(self.trees.len());
        out.iter_mut().for_each(|o| *o /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng::from_seed(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let z: f64 = StandardNormal.sample(&mut r);
            z + if y[i] == 1 { sep / 2.0 } else { -sep / 2.0 }
        });
        (x, y)
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0], [2.0]];
        let cfg = ForestConfig::default();
        assert_eq!(RandomForest::fit(x.view(), &[1, 1, 1], 2, &cfg), Err(ForestError::SingleClass));
        assert_eq!(RandomForest::fit(x.slice(ndarray::s![..1, ..]), &[0], 2, &cfg), Err(ForestError::EmptyTrainingSet));
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(400, 8.0, 1);
        let cfg = ForestConfig { n_trees: 25, ..ForestConfig::default() }.with_seed(2);
        let f = RandomForest::fit(x.slice(ndarray::s![..200, ..]), &y[..200], 2, &cfg).unwrap();
        let pred = f.predict(x.slice(ndarray::s![200.., ..])).unwrap();
        let acc = pred.iter().zip(&y[200..]).filter(|(a, b)| a == b).count() as f64 / 200.0;
        assert!(acc >= 0.95, "holdout accuracy {acc}");
        assert!(f.oob_accuracy.unwrap() >= 0.95);
    }

    #[test]
    fn deterministic_and_normalized() {
        let (x, y) = blobs(100, 1.0, 3);
        let cfg = ForestConfig { n_trees: 10, ..ForestConfig::default() }.with_seed(5);
        let a = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        let b = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let p = a.predict_proba(x.view()).unwrap();
        for r in p.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }
        let pred = a.predict(x.view()).unwrap();
        for (r, &c) in p.rows().into_iter().zip(&pred) {
            assert_eq!(argmax(r.as_slice().unwrap()), c);
        }
    }

    #[test]
    fn unlimited_depth_fits_training_data() {
        let (x, y) = blobs(120, 0.5, 4);
        let cfg = ForestConfig { n_trees: 1, bootstrap: false, features_per_split: FeatureSubset::All, ..ForestConfig::default() };
        let f = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        assert_eq!(f.predict(x.view()).unwrap(), y);
        let p = f.predict_proba(x.view()).unwrap();
        assert!(p.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn duplicated_trees_do_not_change_probabilities() {
        let (x, y) = blobs(60, 1.0, 6);
        let cfg = ForestConfig { n_trees: 1, ..ForestConfig::default() }.with_seed(9);
        let one = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        let mut two = one.clone();
        two.trees.push(one.trees[0].clone());
        assert_eq!(one.predict_proba(x.view()).unwrap(), two.predict_proba(x.view()).unwrap());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 1.0, 0.0]), 1);
    }

    #[test]
    fn width_checked_and_json_round_trip() {
        let (x, y) = blobs(40, 2.0, 7);
        let cfg = ForestConfig { n_trees: 3, ..ForestConfig::default() };
        let f = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        let bad = Array2::<f64>::zeros((2, 3));
        assert_eq!(f.predict(bad.view()), Err(ForestError::DimensionMismatch { expected: 2, found: 3 }));
        let back = RandomForest::<f64>::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let tampered = f.to_json().replace("\"version\":1", "\"version\":9");
        assert!(RandomForest::<f64>::from_json(&tampered).is_err());
    }

    #[test]
    fn f32_forest() {
        let (x, y) = blobs(80, 6.0, 8);
        let x32 = x.mapv(|v| v as f32);
        let cfg = ForestConfig { n_trees: 5, ..ForestConfig::default() };
        let f = RandomForest::<f32>::fit(x32.view(), &y, 2, &cfg).unwrap();
        let p = f.predict_proba(x32.view()).unwrap();
        assert!(p.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-5));
    }
}
