//! Dataset-shift detection for tabular data.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod benchmark;
pub mod detectors;
pub mod forest;
pub mod linalg;
pub mod projections;
pub mod rng;
pub mod scalar;
pub mod shift;
pub mod stats;
pub mod tabular;

pub use scalar::Real;

pub type Forest = forest::RandomForest<f64>;
pub type Confusion = forest::ConfusionMatrix<f64>;
pub type Pca = projections::PcaModel<f64>;
pub type Srp = projections::SrpModel<f64>;
pub type Encoded = tabular::EncodedMatrix<f64>;
pub type Context = detectors::DetectorContext<f64>;
pub type Sample = detectors::PreparedSample<f64>;
pub type Test = stats::TestResult<f64>;
