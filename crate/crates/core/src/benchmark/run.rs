use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::{family_comparisons, Comparison};
use super::metrics::{aggregate, Summary};
use super::{BenchmarkError, DatasetSource, ExperimentPlan, Result};
use crate::detectors::{calibrate, detect_suite, DetectorContext, DetectorName, PreparedSample};
use crate::rng;
use crate::shift::{self, choose_rows, ShiftContext, ShiftKind};
use crate::tabular::{split_with_remainder, Dataset};

/// One detector evaluation: dataset × shift × size × seed × detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    /// Position of the shift in the plan.
    pub shift_index: usize,
    pub shift: String,
    pub params: String,
    pub size: usize,
    /// Rows per side actually compared (`size` capped by the shifted target).
    pub effective_size: usize,
    pub seed: u64,
    pub detector: String,
    pub p_value: Option<f64>,
    pub level: Option<f64>,
    pub detected: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub dataset: String,
    pub detector: String,
    pub size: usize,
    pub level: f64,
    pub degenerate: bool,
}

/// Bookkeeping for one applied shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRun {
    pub dataset: String,
    pub shift_index: usize,
    pub seed: u64,
    pub target_rows: usize,
    pub affected_rows: usize,
    pub attack_failures: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub plan: ExperimentPlan,
    pub levels: Vec<LevelRecord>,
    pub calibration_errors: Vec<String>,
    pub shift_runs: Vec<ShiftRun>,
    pub cells: Vec<CellResult>,
    #[serde(flatten)]
    pub summary: Summary,
    pub comparisons: Vec<Comparison>,
}

/// Fitted per-dataset state shared by every cell.
pub(crate) struct Prepared {
    pub name: String,
    pub seed: u64,
    pub ctx: DetectorContext<f64>,
    pub source: PreparedSample<f64>,
    pub target: Dataset,
    pub train_encoded: ndarray::Array2<f64>,
    /// Source rows plus any rows the split left unused.
    pub pool: PreparedSample<f64>,
}

pub(crate) fn prepare_dataset(plan: &ExperimentPlan, src: &DatasetSource) -> Result<Prepared> {
    let ds = src.load(plan.base_dir.as_deref())?;
    let (train, source, target, rest) =
        split_with_remainder(&ds, &plan.split).map_err(|source| BenchmarkError::Load { dataset: src.name.clone(), source })?;
    let seed = rng::derive(plan.seed, &[rng::tag(&src.name)]);
    let setup = |source| BenchmarkError::Setup { dataset: src.name.clone(), source };
    let cfg = plan.context.with_seed(rng::derive(seed, &[plan.context.seed]));
    let ctx = DetectorContext::<f64>::fit(&train, &cfg).map_err(setup)?;
    let source_p = ctx.prepare(&source).map_err(setup)?;
    let pool = if rest.is_empty() {
        source_p.clone()
    } else {
        PreparedSample::stack(&[&source_p, &ctx.prepare(&rest).map_err(setup)?]).map_err(setup)?
    };
    let train_encoded = ctx.encode(&train).map_err(setup)?.values;
    Ok(Prepared { name: src.name.clone(), seed, ctx, source: source_p, target, train_encoded, pool })
}

/// Calibrate every adaptive detector of the plan at every size.
fn calibrate_levels(plan: &ExperimentPlan, p: &mut Prepared, levels: &mut Vec<LevelRecord>, errors: &mut Vec<String>) {
    let names: Vec<DetectorName> =
        plan.detectors.iter().filter(|d| d.adaptive).map(|d| d.name).collect::<BTreeSet<_>>().into_iter().collect();
    if names.is_empty() {
        return;
    }
    for &size in &plan.sizes {
        let seed = rng::derive(p.seed, &[rng::tag("calibration")]);
        match calibrate(&p.ctx, &p.pool, &names, size, plan.calibration_runs, plan.alpha, seed) {
            Ok(cals) => {
                for c in cals {
                    p.ctx.levels.insert(c.detector, size, c.level);
                    levels.push(LevelRecord {
                        dataset: p.name.clone(),
                        detector: c.detector.label().to_owned(),
                        size,
                        level: c.level,
                        degenerate: c.degenerate,
                    });
                }
            }
            Err(e) => errors.push(format!("{} at size {size}: {e}", p.name)),
        }
    }
}

fn cells_for(plan: &ExperimentPlan, p: &Prepared, shift_index: usize, seed: u64) -> (ShiftRun, Vec<CellResult>) {
    let spec = &plan.shifts[shift_index];
    let applied = spec.with_seed(rng::derive(spec.seed, &[rng::tag(&p.name), seed]));
    let sctx = ShiftContext {
        encoder: Some(&p.ctx.encoder),
        model: p.ctx.model.as_deref(),
        pool: Some(&p.train_encoded),
    };
    let template = |size: usize, effective: usize, detector: String| CellResult {
        dataset: p.name.clone(),
        shift_index,
        shift: spec.kind.label().to_owned(),
        params: spec.params_label(),
        size,
        effective_size: effective,
        seed,
        detector,
        p_value: None,
        level: None,
        detected: None,
        error: None,
    };
    let outcome = shift::apply(&p.target, &applied, &sctx).map_err(|e| e.to_string()).and_then(|o| {
        let t = p.ctx.prepare(&o.target).map_err(|e| e.to_string())?;
        Ok((o, t))
    });
    let mut cells = Vec::new();
    let run = match &outcome {
        Ok((o, _)) => ShiftRun {
            dataset: p.name.clone(),
            shift_index,
            seed,
            target_rows: o.target.n_rows(),
            affected_rows: o.affected_rows.len(),
            attack_failures: o.attack_failures,
            error: None,
        },
        Err(e) => ShiftRun {
            dataset: p.name.clone(),
            shift_index,
            seed,
            target_rows: 0,
            affected_rows: 0,
            attack_failures: 0,
            error: Some(e.clone()),
        },
    };
    for &size in &plan.sizes {
        let (o, target) = match &outcome {
            Ok(v) => v,
            Err(e) => {
                for d in &plan.detectors {
                    cells.push(CellResult { error: Some(e.clone()), ..template(size, 0, d.label()) });
                }
                continue;
            }
        };
        let eff = size.min(p.source.n_rows()).min(o.target.n_rows());
        let s_rows = choose_rows(p.source.n_rows(), eff, &mut rng::stream(p.seed, &[rng::tag("source-sample"), size as u64, seed]));
        let t_rows = choose_rows(
            target.n_rows(),
            eff,
            &mut rng::stream(p.seed, &[rng::tag("target-sample"), shift_index as u64, size as u64, seed]),
        );
        let (s, t) = (p.source.select(&s_rows), target.select(&t_rows));
        let suite_seed = rng::derive(p.seed, &[rng::tag("suite"), shift_index as u64, size as u64, seed]);
        for (d, res) in plan.detectors.iter().zip(detect_suite(&p.ctx, &s, &t, &plan.detectors, size, suite_seed)) {
            let base = template(size, eff, d.label());
            cells.push(match res {
                Ok(r) if r.p_value.is_finite() => CellResult {
                    p_value: Some(r.p_value),
                    level: Some(r.level),
                    detected: Some(r.detected),
                    ..base
                },
                Ok(r) => CellResult { error: Some(format!("non-finite p-value {}", r.p_value)), ..base },
                Err(e) => CellResult { error: Some(e.to_string()), ..base },
            });
        }
    }
    (run, cells)
}

/// Execute `plan` on a pool of `jobs` threads. The report does not depend on
/// `jobs`.
pub fn run(plan: &ExperimentPlan, jobs: usize) -> Result<BenchmarkReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchmarkError::InvalidPlan(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| run_inner(plan))
}

fn run_inner(plan: &ExperimentPlan) -> Result<BenchmarkReport> {
    let mut levels = Vec::new();
    let mut calibration_errors = Vec::new();
    let mut shift_runs = Vec::new();
    let mut cells = Vec::new();
    for src in &plan.datasets {
        let mut p = prepare_dataset(plan, src)?;
        calibrate_levels(plan, &mut p, &mut levels, &mut calibration_errors);
        let tasks: Vec<(usize, u64)> =
            (0..plan.shifts.len()).flat_map(|i| plan.seeds.iter().map(move |&s| (i, s))).collect();
        let results: Vec<(ShiftRun, Vec<CellResult>)> =
            tasks.par_iter().map(|&(i, seed)| cells_for(plan, &p, i, seed)).collect();
        for (r, c) in results {
            shift_runs.push(r);
            cells.extend(c);
        }
    }
    let summary = aggregate(&cells, &plan.sizes);
    let comparisons = family_comparisons(&summary, &plan.detectors);
    Ok(BenchmarkReport { plan: plan.clone(), levels, calibration_errors, shift_runs, cells, summary, comparisons })
}

impl BenchmarkReport {
    /// Shift types with at least one positive cell in the report.
    pub fn shift_types(&self) -> Vec<ShiftKind> {
        ShiftKind::TYPES.iter().copied().filter(|k| self.summary.tpr.iter().any(|t| t.shift_type == k.label())).collect()
    }
}
