//! PCA fitted on a training split and sparse random projection.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{symmetric_eigen, LinalgError};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("training data has zero total variance")]
    DegenerateData,
    #[error("need at least two rows and one column, got {0} x {1}")]
    TooSmall(usize, usize),
    #[error("input width {found} does not match the fitted width {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ProjectionError>;

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ProjectionError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Principal axes retaining a share of the training variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PcaModel<T: Real = f64> {
    pub mean: Array1<T>,
    /// `r x m`, one unit axis per row.
    pub components: Array2<T>,
    pub explained_variance: Vec<T>,
    pub total_variance: T,
    pub variance_retention: T,
}

impl<T: Real> PcaModel<T> {
    /// Center, eigendecompose the `1/(n-1)` covariance with Jacobi rotations and
    /// keep the shortest prefix of axes reaching `variance_retention`. Each axis
    /// is signed so that its largest-magnitude entry is positive.
    pub fn fit(x: ArrayView2<'_, T>, variance_retention: T) -> Result<Self> {
        let (n, m) = x.dim();
        if n < 2 || m == 0 {
            return Err(ProjectionError::TooSmall(n, m));
        }
        if !(variance_retention > T::zero() && variance_retention <= T::one()) {
            return Err(ProjectionError::InvalidArgument(format!("retention {variance_retention} outside (0, 1]")));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let centered = &x - &mean;
        let cov = centered.t().dot(&centered) / T::of_usize(n - 1);
        let (values, vectors) = symmetric_eigen(&cov)?;
        let values: Vec<T> = values.into_iter().map(|v| v.max(T::zero())).collect();
        let total = values.iter().fold(T::zero(), |a, &b| a + b);
        if !(total > T::zero()) {
            return Err(ProjectionError::DegenerateData);
        }
        let target = variance_retention * total - T::of(1e-12).max(T::epsilon() * T::of(8.0)) * total;
        let mut r = 0;
        let mut cum = T::zero();
        while r < m {
            cum += values[r];
            r += 1;
            if cum >= target {
                break;
            }
        }
        let mut components = Array2::<T>::zeros((r, m));
        for a in 0..r {
            let col = vectors.column(a);
            let mut lead = 0;
            for j in 1..m {
                if col[j].abs() > col[lead].abs() {
                    lead = j;
                }
            }
            let sign = if col[lead] < T::zero() { -T::one() } else { T::one() };
            for j in 0..m {
                components[[a, j]] = col[j] * sign;
            }
        }
        Ok(Self {
            mean,
            components,
            explained_variance: values[..r].to_vec(),
            total_variance: total,
            variance_retention,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    /// `(x - mean) componentsᵀ`.
    pub fn transform(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_width(self.input_dim(), x.ncols())?;
        Ok((&x - &self.mean).dot(&self.components.t()))
    }

    /// Map scores back to the input space.
    pub fn inverse_transform(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_width(self.output_dim(), z.ncols())?;
        Ok(z.dot(&self.components) + &self.mean)
    }

    pub fn explained_variance_ratio(&self) -> Vec<T> {
        self.explained_variance.iter().map(|&v| v / self.total_variance).collect()
    }
}

/// One nonzero entry of a sparse projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrpEntry {
    pub row: u32,
    pub col: u32,
    pub sign: i8,
}

/// Sparse random projection with entries `{+a, 0, -a}`, `a = sqrt(1 / (density r))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SrpModel<T: Real = f64> {
    pub input_dim: usize,
    pub output_dim: usize,
    pub density: T,
    pub seed: u64,
    pub scale: T,
    pub entries: Vec<SrpEntry>,
}

/// The usual `1 / sqrt(m)` density.
pub fn default_density(m: usize) -> f64 {
    1.0 / (m.max(1) as f64).sqrt()
}

impl<T: Real> SrpModel<T> {
    pub fn fit(m: usize, r: usize, density: T, seed: u64) -> Result<Self> {
        if r == 0 || m == 0 {
            return Err(ProjectionError::InvalidArgument(format!("dimensions must be positive (m = {m}, r = {r})")));
        }
        if !(density > T::zero() && density <= T::one()) {
            return Err(ProjectionError::InvalidArgument(format!("density {density} outside (0, 1]")));
        }
        let mut g = rng::from_seed(seed);
        let d = density.as_f64();
        let mut entries = Vec::new();
        for row in 0..r {
            for col in 0..m {
                let u: f64 = g.random();
                let sign = if u < d / 2.0 {
                    1
                } else if u < d {
                    -1
                } else {
                    continue;
                };
                entries.push(SrpEntry { row: row as u32, col: col as u32, sign });
            }
        }
        let scale = (T::one() / (density * T::of_usize(r))).sqrt();
        Ok(Self { input_dim: m, output_dim: r, density, seed, scale, entries })
    }

    /// Dense `r x m` projection matrix.
    pub fn matrix(&self) -> Array2<T> {
        let mut p = Array2::<T>::zeros((self.output_dim, self.input_dim));
        for e in &self.entries {
            p[[e.row as usize, e.col as usize]] = if e.sign > 0 { self.scale } else { -self.scale };
        }
        p
    }

    /// `x projectionᵀ`.
    pub fn transform(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_width(self.input_dim, x.ncols())?;
        let mut out = Array2::<T>::zeros((x.nrows(), self.output_dim));
        for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
            for e in &self.entries {
                let v = xr[e.col as usize] * self.scale;
                if e.sign > 0 {
                    or[e.row as usize] += v;
                } else {
                    or[e.row as usize] -= v;
                }
            }
        }
        Ok(out)
    }
}
