use std::collections::BTreeMap;

use super::bbsd::{bbsdh, bbsds};
use super::context::{DetectorContext, PreparedSample};
use super::domain::domain_classifier;
use super::feature::{test_pca, test_srp, test_x};
use super::{DetectionResult, DetectorError, DetectorName, DetectorSpec, RawOutcome, Result};
use crate::rng;
use crate::scalar::Real;
use crate::tabular::EncodedMatrix;

/// Seed of the domain classifier behind `name` for a detection keyed by `seed`.
fn dc_seed(seed: u64, name: DetectorName) -> u64 {
    rng::derive(seed, &[rng::tag(name.label())])
}

fn base_outcome<T: Real>(
    ctx: &DetectorContext<T>,
    name: DetectorName,
    s: &PreparedSample<T>,
    t: &PreparedSample<T>,
    seed: u64,
) -> Result<RawOutcome> {
    match name {
        DetectorName::BBSDs => bbsds(s, t),
        DetectorName::BBSDh => bbsdh(s, t),
        DetectorName::TestX => test_x(s, t),
        DetectorName::TestPca => test_pca(s, t),
        DetectorName::TestSrp => test_srp(s, t),
        DetectorName::DC => domain_classifier(ctx, s, t, false, dc_seed(seed, name)),
        DetectorName::DCstar => domain_classifier(ctx, s, t, true, dc_seed(seed, name)),
        DetectorName::BBSDsPlusX | DetectorName::BBSDsPlusDC => {
            unreachable!("ensembles are combined from their members")
        }
    }
}

/// `min(1, 2 min(p_a, p_b))` over the two members.
fn combine(a: &RawOutcome, b: &RawOutcome) -> RawOutcome {
    RawOutcome {
        p_value: (2.0 * a.p_value.min(b.p_value)).min(1.0),
        components: vec![a.p_value, b.p_value],
        tests: 2,
        dc_accuracy: a.dc_accuracy.or(b.dc_accuracy),
    }
}

fn outcome<T: Real>(
    ctx: &DetectorContext<T>,
    name: DetectorName,
    s: &PreparedSample<T>,
    t: &PreparedSample<T>,
    seed: u64,
) -> Result<RawOutcome> {
    match name.members() {
        Some((a, b)) => Ok(combine(&base_outcome(ctx, a, s, t, seed)?, &base_outcome(ctx, b, s, t, seed)?)),
        None => base_outcome(ctx, name, s, t, seed),
    }
}

/// Run one detector on prepared samples. Adaptive specs look their level up at
/// `min(|source|, |target|)`; `seed` keys the domain classifier draws.
pub fn detect<T: Real>(
    ctx: &DetectorContext<T>,
    source: &PreparedSample<T>,
    target: &PreparedSample<T>,
    spec: &DetectorSpec,
    seed: u64,
) -> Result<DetectionResult> {
    let size = source.n_rows().min(target.n_rows());
    let level = ctx.level_for(spec, size)?;
    Ok(outcome(ctx, spec.name, source, target, seed)?.decide(spec, level))
}

/// Run several detectors on one (source, target) pair, evaluating each base
/// detector at most once so ensembles reuse their members' p-values.
/// Adaptive levels are read at `level_size`.
pub fn detect_suite<T: Real>(
    ctx: &DetectorContext<T>,
    source: &PreparedSample<T>,
    target: &PreparedSample<T>,
    specs: &[DetectorSpec],
    level_size: usize,
    seed: u64,
) -> Vec<Result<DetectionResult>> {
    let mut memo: BTreeMap<DetectorName, std::result::Result<RawOutcome, String>> = BTreeMap::new();
    let mut base = |name: DetectorName| -> std::result::Result<RawOutcome, String> {
        memo.entry(name)
            .or_insert_with(|| base_outcome(ctx, name, source, target, seed).map_err(|e| e.to_string()))
            .clone()
    };
    specs
        .iter()
        .map(|spec| {
            let raw = match spec.name.members() {
                Some((a, b)) => base(a).and_then(|ra| base(b).map(|rb| combine(&ra, &rb))),
                None => base(spec.name),
            };
            let raw = raw.map_err(|message| DetectorError::InvalidArgument(format!("{}: {message}", spec.name)))?;
            Ok(raw.decide(spec, ctx.level_for(spec, level_size)?))
        })
        .collect()
}

pub(crate) fn evaluate_one<T: Real>(
    ctx: &DetectorContext<T>,
    name: DetectorName,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    let spec = DetectorSpec { name, ..*spec };
    let s = ctx.prepare_encoded(source.values.clone())?;
    let t = ctx.prepare_encoded(target.values.clone())?;
    detect(ctx, &s, &t, &spec, ctx.dc_config.seed)
}

/// Pair ensemble (`BBSDs+X` or `BBSDs+DC`) with a two-way Bonferroni correction.
pub fn detect_ensemble_pair<T: Real>(
    ctx: &DetectorContext<T>,
    source: &EncodedMatrix<T>,
    target: &EncodedMatrix<T>,
    spec: &DetectorSpec,
) -> Result<DetectionResult> {
    if spec.name.members().is_none() {
        return Err(DetectorError::InvalidArgument(format!("{} is not a pair ensemble", spec.name)));
    }
    evaluate_one(ctx, spec.name, source, target, spec)
}
