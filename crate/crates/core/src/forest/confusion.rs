use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ForestError, Result};
use crate::scalar::Real;

/// Column-normalized confusion matrix: `c[[i, j]] = P(ŷ = i | y = j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConfusionMatrix<T: Real = f64> {
    pub c: Array2<T>,
    pub support: Vec<usize>,
}

impl<T: Real> ConfusionMatrix<T> {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], k: usize) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(ForestError::InvalidArgument(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut counts = Array2::<usize>::zeros((k, k));
        let mut support = vec![0usize; k];
        for (&p, &t) in predicted.iter().zip(truth) {
            if p >= k || t >= k {
                return Err(ForestError::InvalidArgument(format!("class id out of range for k = {k}")));
            }
            counts[[p, t]] += 1;
            support[t] += 1;
        }
        if let Some(j) = support.iter().position(|&s| s == 0) {
            return Err(ForestError::EmptyClassColumn(j));
        }
        let c = Array2::from_shape_fn((k, k), |(i, j)| T::of_usize(counts[[i, j]]) / T::of_usize(support[j]));
        Ok(Self { c, support })
    }

    pub fn k(&self) -> usize {
        self.c.nrows()
    }
}

/// Fraction of matching entries.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn perfect_is_identity() {
        let y = [0, 1, 2, 1, 0];
        let cm: ConfusionMatrix = ConfusionMatrix::from_predictions(&y, &y, 3).unwrap();
        assert_eq!(cm.c, Array2::<f64>::eye(3));
        assert_eq!(cm.support, vec![2, 2, 1]);
    }

    #[test]
    fn random_predictions_near_half() {
        let n = 20_000;
        let mut r = rng::from_seed(11);
        let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let cm: ConfusionMatrix = ConfusionMatrix::from_predictions(&pred, &truth, 2).unwrap();
        let tol = 3.0 / (n as f64 / 2.0).sqrt();
        assert!(cm.c.iter().all(|&v| (v - 0.5).abs() < tol));
        for j in 0..2 {
            assert!((cm.c.column(j).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_class_column() {
        let r = ConfusionMatrix::<f64>::from_predictions(&[0, 0], &[0, 0], 2);
        assert_eq!(r, Err(ForestError::EmptyClassColumn(1)));
    }
}
