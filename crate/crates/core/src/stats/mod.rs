//! Hypothesis tests and p-value utilities.

mod binomial;
mod chi2;
mod ks;
mod ranks;
pub mod special;

pub use binomial::binomial_test_greater;
pub use chi2::chi2_homogeneity;
pub use ks::{kolmogorov_q, ks_p_value, ks_statistic, ks_statistic_sorted, ks_two_sample};
pub use ranks::{average_ranks, friedman_test, nemenyi_cd, nemenyi_groups, NEMENYI_Q_005};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("no Nemenyi critical value for k = {0} (supported: 2..=10)")]
    UnsupportedK(usize),
    #[error("Nemenyi critical values are tabulated for alpha = 0.05 only, got {0}")]
    UnsupportedAlpha(f64),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Statistic and p-value of one test.
///
/// For rank tests `n_source` holds the number of datasets and `n_target` the
/// number of compared methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TestResult<T: Real = f64> {
    pub statistic: T,
    pub p_value: T,
    pub n_source: usize,
    pub n_target: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregationMethod {
    Bonferroni,
}

/// Several p-values combined into one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AggregatedTest<T: Real = f64> {
    pub component_p_values: Vec<T>,
    pub k: usize,
    pub aggregated_p: T,
    pub method: AggregationMethod,
}

#[inline]
pub(crate) fn clamp_unit<T: Real>(p: T) -> T {
    if p.is_nan() {
        T::one()
    } else {
        p.max(T::zero()).min(T::one())
    }
}

/// `min(1, k * min p)`.
pub fn bonferroni<T: Real>(p_values: &[T]) -> Result<AggregatedTest<T>> {
    if p_values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if let Some(bad) = p_values.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
        return Err(StatsError::InvalidArgument(format!("p-value {bad} outside [0, 1]")));
    }
    let k = p_values.len();
    let min = p_values.iter().copied().fold(T::one(), T::min);
    Ok(AggregatedTest {
        component_p_values: p_values.to_vec(),
        k,
        aggregated_p: (T::of_usize(k) * min).min(T::one()),
        method: AggregationMethod::Bonferroni,
    })
}

/// Lower empirical quantile: the `ceil(q n)`-th smallest value (the minimum for `q = 0`).
pub fn empirical_quantile<T: Real>(values: &[T], q: T) -> Result<T> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if !(q >= T::zero() && q <= T::one()) {
        return Err(StatsError::InvalidArgument(format!("quantile {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(crate::scalar::total_cmp);
    let n = sorted.len();
    // Guard against q*n landing a hair above an integer through rounding.
    let pos = (q.as_f64() * n as f64 - 1e-9).ceil().max(0.0) as usize;
    Ok(sorted[pos.saturating_sub(1).min(n - 1)])
}
