use rand_distr::{Distribution, Normal};

use super::{choose_rows, column_sigma, floor_frac, Result, ShiftError, ShiftKind, ShiftOutcome, ShiftSpec};
use crate::rng;
use crate::tabular::{Cell, Dataset};

/// Noise scale in units of the per-feature standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseLevel {
    Small,
    Medium,
    Custom(f64),
}

impl NoiseLevel {
    pub fn scale(&self) -> f64 {
        match self {
            NoiseLevel::Small => 0.1,
            NoiseLevel::Medium => 1.0,
            NoiseLevel::Custom(c) => *c,
        }
    }
}

/// Adds `N(0, (c·σ_j)²)` to `⌊s·n⌋` rows on `⌊f·d_num⌋` numeric features.
/// Missing cells stay missing.
pub fn gaussian_noise(ds: &Dataset, s: f64, f: f64, level: NoiseLevel, seed: u64) -> Result<ShiftOutcome> {
    let numeric = ds.numeric_columns();
    if numeric.is_empty() {
        return Err(ShiftError::NoNumericFeatures);
    }
    let c = level.scale();
    if !(c.is_finite() && c >= 0.0) {
        return Err(ShiftError::InvalidSpec(format!("noise scale {c} must be finite and non-negative")));
    }
    let rows = choose_rows(ds.n_rows(), floor_frac(s, ds.n_rows()), &mut rng::stream(seed, &[rng::tag("rows")]));
    let features: Vec<usize> = choose_rows(numeric.len(), floor_frac(f, numeric.len()), &mut rng::stream(seed, &[rng::tag("features")]))
        .into_iter()
        .map(|j| numeric[j])
        .collect();
    let sigma: Vec<f64> = features.iter().map(|&j| column_sigma(ds, j)).collect();
    let mut cells = ds.rows().to_vec();
    if !features.is_empty() {
        for &i in &rows {
            let mut r = rng::stream(seed, &[rng::tag("noise"), ds.row_ids()[i]]);
            for (&j, &sd) in features.iter().zip(&sigma) {
                if let Cell::Num(v) = cells[i][j] {
                    let noise = if sd * c > 0.0 { Normal::new(0.0, sd * c).expect("positive sd").sample(&mut r) } else { 0.0 };
                    cells[i][j] = Cell::Num(v + noise);
                }
            }
        }
    }
    let affected = if features.is_empty() { Vec::new() } else { rows.iter().map(|&i| ds.row_ids()[i]).collect() };
    let kind = match level {
        NoiseLevel::Small => ShiftKind::GaussianSmall,
        _ => ShiftKind::GaussianMedium,
    };
    Ok(ShiftOutcome {
        target: ds.with_rows(cells, ds.labels().map(<[usize]>::to_vec), ds.row_ids().to_vec())?,
        applied: ShiftSpec::new(kind, Some(s), Some(f)).with_seed(seed),
        affected_rows: affected,
        attack_failures: 0,
    })
}
