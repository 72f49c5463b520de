use std::sync::Arc;

use super::{Classifier, ForestError, Result};
use crate::rng;
use crate::scalar::Real;

/// Wraps a classifier so that, independently per row, with probability
/// `p_corrupt` the output is replaced by a one-hot vector of a uniformly drawn
/// class. The draw depends only on `(row index, seed)`.
#[derive(Clone)]
pub struct PerturbedModel<T: Real> {
    pub base: Arc<dyn Classifier<T>>,
    pub p_corrupt: f64,
    pub seed: u64,
}

impl<T: Real> std::fmt::Debug for PerturbedModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbedModel").field("p_corrupt", &self.p_corrupt).field("seed", &self.seed).finish()
    }
}

pub fn perturb<T: Real>(base: Arc<dyn Classifier<T>>, p_corrupt: f64, seed: u64) -> Result<PerturbedModel<T>> {
    if !(0.0..=1.0).contains(&p_corrupt) {
        return Err(ForestError::InvalidArgument(format!("p_corrupt = {p_corrupt} outside [0, 1]")));
    }
    Ok(PerturbedModel { base, p_corrupt, seed })
}

impl<T: Real> PerturbedModel<T> {
    /// Replacement class for row `index`, if that row is corrupted.
    pub fn corruption(&self, index: usize) -> Option<usize> {
        let h = rng::derive(self.seed, &[index as u64]);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        (u < self.p_corrupt).then(|| (rng::derive(h, &[1]) % self.base.n_classes() as u64) as usize)
    }
}

impl<T: Real> Classifier<T> for PerturbedModel<T> {
    fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    fn n_features(&self) -> usize {
        self.base.n_features()
    }

    fn predict_proba_row(&self, row: &[T], index: usize, out: &mut [T]) {
        match self.corruption(index) {
            Some(c) => {
                out.iter_mut().for_each(|o| *o = T::zero());
                out[c] = T::one();
            }
            None => self.base.predict_proba_row(row, index, out),
        }
    }
}
