use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ColumnSchema, Dataset, Result, TabularError, Cell};
use crate::rng;

/// Gaussian-mixture generator: one multivariate normal per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// One mean vector of length `d` per class; `k = centers.len()`.
    pub centers: Vec<Vec<f64>>,
    /// Either a single shared `d x d` covariance or one per class.
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Class proportions; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Unit shared covariance around the given centers.
    pub fn isotropic(n: usize, centers: Vec<Vec<f64>>, seed: u64) -> Self {
        let d = centers.first().map_or(0, Vec::len);
        let eye = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { n, centers, covariances: vec![eye], weights: None, seed }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn d(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }
}

fn cholesky(a: &[Vec<f64>], d: usize) -> Option<Vec<Vec<f64>>> {
    if a.len() != d || a.iter().any(|r| r.len() != d) {
        return None;
    }
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-9 * (1.0 + a[i][j].abs()) {
                return None;
            }
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let v = a[i][i] - s;
                if v <= 0.0 {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Exact per-class counts: floor of `n * w` plus largest remainders.
fn class_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    counts
}

/// Draw a labeled Gaussian-mixture dataset. Columns `x0..`, label `y`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let k = spec.k();
    let d = spec.d();
    if k < 2 {
        return Err(TabularError::InvalidSpec("need at least two classes".into()));
    }
    if d == 0 || spec.centers.iter().any(|c| c.len() != d || c.iter().any(|v| !v.is_finite())) {
        return Err(TabularError::InvalidSpec("centers must share a positive finite dimension".into()));
    }
    if spec.covariances.len() != 1 && spec.covariances.len() != k {
        return Err(TabularError::InvalidSpec("give one shared covariance or one per class".into()));
    }
    let factors = spec
        .covariances
        .iter()
        .map(|c| cholesky(c, d))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TabularError::InvalidSpec("covariance is not symmetric positive definite".into()))?;
    let weights = match &spec.weights {
        Some(w) if w.len() != k || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 => {
            return Err(TabularError::InvalidSpec("weights must be k non-negative numbers".into()))
        }
        Some(w) => w.clone(),
        None => vec![1.0; k],
    };

    let mut rng = rng::from_seed(spec.seed);
    let mut labels: Vec<usize> = class_counts(spec.n, &weights)
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
        .collect();
    labels.shuffle(&mut rng);

    let mut z = vec![0.0; d];
    let rows = labels
        .iter()
        .map(|&y| {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let l = &factors[if factors.len() == 1 { 0 } else { y }];
            (0..d)
                .map(|i| {
                    let noise: f64 = (0..=i).map(|p| l[i][p] * z[p]).sum();
                    Cell::Num(spec.centers[y][i] + noise)
                })
                .collect()
        })
        .collect();
    let schema = (0..d).map(|j| ColumnSchema::numeric(format!("x{j}"))).collect();
    let names = (0..k).map(|c| c.to_string()).collect();
    let mut ds = Dataset::new(schema, rows, Some(labels), Some(names))?;
    ds.set_label_name(Some("y".into()));
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_means_near_centers() {
        let n = 4000;
        let spec = SyntheticSpec::isotropic(n, vec![vec![-1.0, -1.0], vec![1.0, 1.0]], 3);
        let ds = make_synthetic(&spec).unwrap();
        let labels = ds.labels().unwrap();
        for c in 0..2 {
            let rows: Vec<&Vec<Cell>> = ds.rows().iter().zip(labels).filter(|(_, &y)| y == c).map(|(r, _)| r).collect();
            let m = rows.len() as f64;
            for j in 0..2 {
                let mean: f64 = rows.iter().map(|r| r[j].as_num().unwrap()).sum::<f64>() / m;
                assert!((mean - spec.centers[c][j]).abs() < 3.0 / m.sqrt(), "class {c} col {j}: {mean}");
            }
        }
    }

    #[test]
    fn empty_and_deterministic() {
        let spec = SyntheticSpec::isotropic(0, vec![vec![0.0], vec![1.0]], 1);
        assert!(make_synthetic(&spec).unwrap().is_empty());
        let spec = SyntheticSpec::isotropic(50, vec![vec![0.0], vec![1.0]], 1);
        assert_eq!(make_synthetic(&spec).unwrap(), make_synthetic(&spec).unwrap());
    }

    #[test]
    fn weights_give_exact_counts() {
        let spec = SyntheticSpec::isotropic(101, vec![vec![0.0], vec![1.0]], 1).with_weights(vec![0.7, 0.3]);
        let ds = make_synthetic(&spec).unwrap();
        assert_eq!(ds.class_counts().unwrap(), vec![71, 30]);
    }

    #[test]
    fn invalid_specs() {
        assert!(make_synthetic(&SyntheticSpec::isotropic(5, vec![vec![0.0]], 1)).is_err());
        let mut spec = SyntheticSpec::isotropic(5, vec![vec![0.0], vec![1.0]], 1);
        spec.covariances = vec![vec![vec![-1.0]]];
        assert!(make_synthetic(&spec).is_err());
    }
}
