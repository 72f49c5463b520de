use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, Result, TabularError};
use crate::rng;

/// Sizes of the train / source / target partition and its seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub source_size: usize,
    pub target_size: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train_size + self.source_size + self.target_size
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_size: 1000, source_size: 2000, target_size: 2000, seed: 0 }
    }
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::from_seed(seed));
    idx
}

/// Disjoint uniform train, source and target subsets.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let (train, source, target, _) = split_with_remainder(ds, spec)?;
    Ok((train, source, target))
}

/// [`split`] plus the rows left over, in permutation order.
pub fn split_with_remainder(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset, Dataset)> {
    let needed = spec.total();
    if needed > ds.n_rows() {
        return Err(TabularError::InsufficientRows { needed, available: ds.n_rows() });
    }
    let perm = permutation(ds.n_rows(), spec.seed);
    let (a, rest) = perm.split_at(spec.train_size);
    let (b, rest) = rest.split_at(spec.source_size);
    let (c, rest) = rest.split_at(spec.target_size);
    Ok((ds.select(a), ds.select(b), ds.select(c), ds.select(rest)))
}

/// Uniform subset of `size` rows without replacement.
pub fn subsample(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if size > ds.n_rows() {
        return Err(TabularError::InsufficientRows { needed: size, available: ds.n_rows() });
    }
    let perm = permutation(ds.n_rows(), seed);
    Ok(ds.select(&perm[..size]))
}
