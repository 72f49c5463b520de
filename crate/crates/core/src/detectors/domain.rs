use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;

use super::context::{DetectorContext, PreparedSample};
use super::ensemble::evaluate_one;
use super::{DetectionResult, DetectorError, DetectorName, DetectorSpec, RawOutcome, Result};
use crate::forest::{argmax, Classifier, RandomForest};
use crate::rng;
use crate::scalar::{total_cmp, Real};
use crate::stats::binomial_test_greater;
use crate::tabular::EncodedMatrix;

fn inputs<T: Real>(s: &PreparedSample<T>, use_predictions: bool) -> Result<Array2<T>> {
    if use_predictions {
        Ok(concatenate(Axis(1), &[s.features.view(), s.proba()?.view()]).expect("equal row counts"))
    } else {
        Ok(s.features.clone())
    }
}

/// Row indices in lexicographic order of their contents, so the split below
/// depends on the multiset of rows and not on their order.
fn canonical_order<T: Real>(x: &Array2<T>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(u, v)| total_cmp(u, v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Domain classifier: a fresh forest separates source (0) from target (1) on a
/// stratified half of the pooled rows; holdout accuracy is tested against 0.5.
pub(crate) fn domain_classifier<T: Real>(
    ctx: &DetectorContext<T>,
    s: &PreparedSample<T>,
    t: &PreparedSample<T>,
    use_predictions: bool,
    seed: u64,
) -> Result<RawOutcome> {
    let (ns, nt) = (s.n_rows(), t.n_rows());
    if ns != nt {
        return Err(DetectorError::UnbalancedInput { source_rows: ns, target_rows: nt });
    }
    if ns < 4 {
        return Err(DetectorError::TooFewSamples(ns));
    }
    let xs = inputs(s, use_predictions)?;
    let xt = inputs(t, use_predictions)?;
    let mut split_rng = rng::stream(seed, &[rng::tag("dc-split")]);
    let mut os = canonical_order(&xs);
    let mut ot = canonical_order(&xt);
    os.shuffle(&mut split_rng);
    ot.shuffle(&mut split_rng);
    let half = ns / 2;
    let train = concatenate(Axis(0), &[xs.select(Axis(0), &os[..half]).view(), xt.select(Axis(0), &ot[..half]).view()])
        .expect("equal widths");
    let hold = concatenate(Axis(0), &[xs.select(Axis(0), &os[half..]).view(), xt.select(Axis(0), &ot[half..]).view()])
        .expect("equal widths");
    let y_train: Vec<usize> = (0..2 * half).map(|i| usize::from(i >= half)).collect();
    let hold_source = ns - half;
    let cfg = ctx.dc_config.with_seed(rng::derive(seed, &[rng::tag("dc-forest")]));
    let forest = RandomForest::fit(train.view(), &y_train, 2, &cfg)?;
    let proba = forest.predict_proba(hold.view())?;
    let correct = proba
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, r)| argmax(r.as_slice().expect("row")) == usize::from(*i >= hold_source))
        .count();
    let trials = hold.nrows();
    let r = binomial_test_greater(correct, trials, 0.5f64)?;
    Ok(RawOutcome {
        p_value: r.p_value,
        components: vec![r.p_value],
        tests: 1,
        dc_accuracy: Some(correct as f64 / trials as f64),
    })
}

/// Domain classifier detector; with `use_predictions` the primary model's
/// probabilities are appended to the features (DC*).
pub fn detect_dc<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
    use_predictions: bool,
) -> Result<DetectionResult> {
    let name = if use_predictions { DetectorName::DCstar } else { DetectorName::DC };
    evaluate_one(ctx, name, source, target, spec)
}
