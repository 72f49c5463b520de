use ndarray::ArrayView2;

use super::context::{DetectorContext, PreparedSample};
use super::ensemble::evaluate_one;
use super::{DetectionResult, DetectorError, DetectorName, DetectorSpec, RawOutcome, Result};
use crate::scalar::{total_cmp, Real};
use crate::stats::{ks_p_value, ks_statistic_sorted};
use crate::tabular::EncodedMatrix;

pub(crate) fn check_pair<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(DetectorError::EmptySample);
    }
    if a.ncols() != b.ncols() {
        return Err(DetectorError::WidthMismatch { expected: a.ncols(), found: b.ncols() });
    }
    Ok(())
}

/// Column-wise KS tests with Bonferroni aggregation. Columns constant across
/// both samples get p = 1 and do not count towards the correction.
pub(crate) fn ks_battery<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Result<RawOutcome> {
    check_pair(a, b)?;
    let mut components = Vec::with_capacity(a.ncols());
    let mut tests = 0usize;
    let mut min_p = 1.0f64;
    let mut xs: Vec<T> = Vec::with_capacity(a.nrows());
    let mut ys: Vec<T> = Vec::with_capacity(b.nrows());
    for (ca, cb) in a.columns().into_iter().zip(b.columns()) {
        xs.clear();
        ys.clear();
        xs.extend(ca.iter().copied());
        ys.extend(cb.iter().copied());
        xs.sort_unstable_by(total_cmp);
        ys.sort_unstable_by(total_cmp);
        let lo = xs[0].min(ys[0]);
        let hi = xs[xs.len() - 1].max(ys[ys.len() - 1]);
        if lo == hi {
            components.push(1.0);
            continue;
        }
        tests += 1;
        let d = ks_statistic_sorted(&xs, &ys);
        let p = ks_p_value(d, xs.len(), ys.len()).as_f64();
        min_p = min_p.min(p);
        components.push(p);
    }
    let p_value = if tests == 0 { 1.0 } else { (tests as f64 * min_p).min(1.0) };
    Ok(RawOutcome { p_value, components, tests, dc_accuracy: None })
}

pub(crate) fn test_x<T: Real>(s: &PreparedSample<T>, t: &PreparedSample<T>) -> Result<RawOutcome> {
    ks_battery(s.features.view(), t.features.view())
}

pub(crate) fn test_pca<T: Real>(s: &PreparedSample<T>, t: &PreparedSample<T>) -> Result<RawOutcome> {
    ks_battery(s.pca.view(), t.pca.view())
}

pub(crate) fn test_srp<T: Real>(s: &PreparedSample<T>, t: &PreparedSample<T>) -> Result<RawOutcome> {
    ks_battery(s.srp.view(), t.srp.view())
}

/// KS on every encoded feature, Bonferroni-aggregated.
pub fn detect_test_x<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    evaluate_one(ctx, DetectorName::TestX, source, target, spec)
}

/// KS on the PCA scores fitted on the training split.
pub fn detect_test_pca<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    evaluate_one(ctx, DetectorName::TestPca, source, target, spec)
}

/// KS on the sparse random projection.
pub fn detect_test_srp<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    evaluate_one(ctx, DetectorName::TestSrp, source, target, spec)
}
