use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::context::{DetectorContext, PreparedSample};
use super::ensemble::detect_suite;
use super::{DetectorError, DetectorName, DetectorSpec, Result};
use crate::rng;
use crate::scalar::Real;
use crate::stats::empirical_quantile;
use crate::tabular::Dataset;

/// Null p-value distribution of one detector at one size and its quantile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub detector: DetectorName,
    pub size: usize,
    pub level: f64,
    pub null_p_values: Vec<f64>,
    /// More than half of the null p-values equal 1.
    pub degenerate: bool,
}

/// Calibrate several detectors jointly: run `r` draws two disjoint subsets of
/// `size` rows from `pool` (seeded by `(seed, size, r)`), evaluates every
/// detector on that null pair, and the level is the lower `alpha` quantile of
/// the collected p-values.
pub fn calibrate<T: Real>(
    ctx: &DetectorContext<T>,
    pool: &PreparedSample<T>,
    detectors: &[DetectorName],
    size: usize,
    runs: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Calibration>> {
    let needed = 2 * size;
    if pool.n_rows() < needed || size == 0 {
        return Err(DetectorError::InsufficientRows { needed: needed.max(2), available: pool.n_rows() });
    }
    if runs == 0 {
        return Err(DetectorError::InvalidArgument("calibration needs at least one run".into()));
    }
    let specs: Vec<DetectorSpec> =
        detectors.iter().map(|&n| DetectorSpec::fixed(n).with_alpha(alpha)).collect::<Result<_>>()?;
    let per_run: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut idx: Vec<usize> = (0..pool.n_rows()).collect();
            idx.shuffle(&mut rng::stream(seed, &[rng::tag("calibration"), size as u64, r as u64]));
            let a = pool.select(&idx[..size]);
            let b = pool.select(&idx[size..needed]);
            detect_suite(ctx, &a, &b, &specs, size, rng::derive(seed, &[r as u64]))
                .into_iter()
                .map(|res| res.map(|d| d.p_value))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    detectors
        .iter()
        .enumerate()
        .map(|(j, &detector)| {
            let null: Vec<f64> = per_run.iter().map(|ps| ps[j]).collect();
            let level = empirical_quantile(&null, alpha)?;
            let ones = null.iter().filter(|&&p| p >= 1.0).count();
            Ok(Calibration { detector, size, level, degenerate: 2 * ones > null.len(), null_p_values: null })
        })
        .collect()
}

/// Calibrate `spec` on splits of `source` and store the level in `ctx`.
pub fn calibrate_significance_level<T: Real>(
    ctx: &mut DetectorContext<T>,
    source: &Dataset,
    spec: &DetectorSpec,
    runs: usize,
    size: usize,
    alpha: f64,
    seed: u64,
) -> Result<Calibration> {
    if source.n_rows() < 2 * size {
        return Err(DetectorError::InsufficientRows { needed: 2 * size, available: source.n_rows() });
    }
    let pool = ctx.prepare(source)?;
    let cal = calibrate(ctx, &pool, &[spec.name], size, runs, alpha, seed)?.remove(0);
    ctx.levels.insert(spec.name, size, cal.level);
    Ok(cal)
}
