use super::context::{DetectorContext, PreparedSample};
use super::ensemble::evaluate_one;
use super::feature::{check_pair, ks_battery};
use super::{DetectionResult, DetectorError, DetectorName, DetectorSpec, RawOutcome, Result};
use crate::forest::argmax;
use crate::scalar::Real;
use crate::stats::chi2_homogeneity;
use crate::tabular::EncodedMatrix;

/// Per-class KS tests on predicted probabilities.
pub(crate) fn bbsds<T: Real>(s: &PreparedSample<T>, t: &PreparedSample<T>) -> Result<RawOutcome> {
    let (ps, pt) = (s.proba()?, t.proba()?);
    ks_battery(ps.view(), pt.view())
}

fn class_histogram<T: Real>(p: &ndarray::Array2<T>) -> Vec<usize> {
    let mut counts = vec![0usize; p.ncols()];
    for row in p.rows() {
        counts[argmax(row.as_slice().expect("standard layout"))] += 1;
    }
    counts
}

/// χ² homogeneity test on hard predictions.
pub(crate) fn bbsdh<T: Real>(s: &PreparedSample<T>, t: &PreparedSample<T>) -> Result<RawOutcome> {
    let (ps, pt) = (s.proba()?, t.proba()?);
    check_pair(ps.view(), pt.view())?;
    let (hs, ht) = (class_histogram(ps), class_histogram(pt));
    let r = chi2_homogeneity::<f64>(&hs, &ht)?;
    let kept = hs.iter().zip(&ht).filter(|(a, b)| **a + **b > 0).count();
    if kept == 0 {
        return Err(DetectorError::EmptySample);
    }
    Ok(RawOutcome { p_value: r.p_value, components: vec![r.p_value], tests: 1, dc_accuracy: None })
}

/// Soft black-box shift detection: KS per class probability.
pub fn detect_bbsds<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    evaluate_one(ctx, DetectorName::BBSDs, source, target, spec)
}

/// Hard black-box shift detection: χ² on predicted classes.
pub fn detect_bbsdh<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    evaluate_one(ctx, DetectorName::BBSDh, source, target, spec)
}
