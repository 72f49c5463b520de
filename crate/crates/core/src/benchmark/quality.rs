use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::aggregate;
use super::run::{prepare_dataset, CellResult, Prepared};
use super::{BenchmarkError, ExperimentPlan, Result};
use crate::detectors::{detect, DetectorName, DetectorSpec};
use crate::forest::perturb;
use crate::rng;
use crate::shift::{self, choose_rows, ShiftContext, ShiftKind};

/// Corruption probability giving a model of quality `q`: at `q = 0.5` a
/// binary model's outputs carry no signal. Uniform replacement can redraw
/// the original class, hence the `k/(k−1)` factor.
pub fn quality_to_corruption(q: f64, k: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    ((1.0 - q) * k as f64 / (k - 1) as f64).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityCell {
    pub dataset: String,
    pub quality: f64,
    pub shift_index: usize,
    pub shift: String,
    pub params: String,
    pub seed: u64,
    pub p_value: Option<f64>,
    pub level: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityEntry {
    pub quality: f64,
    pub shift_type: String,
    pub tpr: f64,
    pub datasets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub qualities: Vec<f64>,
    pub size: usize,
    pub cells: Vec<QualityCell>,
    pub table: Vec<QualityEntry>,
}

fn quality_label(q: f64) -> String {
    format!("q={q}")
}

fn cells_for(plan: &ExperimentPlan, p: &Prepared, qualities: &[f64], size: usize, shift_index: usize, seed: u64) -> Vec<QualityCell> {
    let spec = &plan.shifts[shift_index];
    let applied = spec.with_seed(rng::derive(spec.seed, &[rng::tag(&p.name), seed]));
    let sctx = ShiftContext { encoder: Some(&p.ctx.encoder), model: p.ctx.model.as_deref(), pool: Some(&p.train_encoded) };
    let cell = |quality: f64, p_value: Option<f64>, error: Option<String>| QualityCell {
        dataset: p.name.clone(),
        quality,
        shift_index,
        shift: spec.kind.label().to_owned(),
        params: spec.params_label(),
        seed,
        p_value,
        level: plan.alpha,
        error,
    };
    let prepared = shift::apply(&p.target, &applied, &sctx)
        .map_err(|e| e.to_string())
        .and_then(|o| p.ctx.encode(&o.target).map_err(|e| e.to_string()));
    let target = match prepared {
        Ok(t) => t.values,
        Err(e) => return qualities.iter().map(|&q| cell(q, None, Some(e.clone()))).collect(),
    };
    let Some(base) = p.ctx.model.clone() else {
        return qualities.iter().map(|&q| cell(q, None, Some("no primary model".into()))).collect();
    };
    let eff = size.min(p.source.n_rows()).min(target.nrows());
    let s_rows = choose_rows(p.source.n_rows(), eff, &mut rng::stream(p.seed, &[rng::tag("source-sample"), size as u64, seed]));
    let t_rows = choose_rows(
        target.nrows(),
        eff,
        &mut rng::stream(p.seed, &[rng::tag("target-sample"), shift_index as u64, size as u64, seed]),
    );
    let s_feat = p.source.features.select(ndarray::Axis(0), &s_rows);
    let t_feat = target.select(ndarray::Axis(0), &t_rows);
    let spec = DetectorSpec::new(DetectorName::BBSDs, false).with_alpha(plan.alpha).expect("plan alpha validated");
    qualities
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            let result = (|| -> std::result::Result<f64, String> {
                let pc = quality_to_corruption(q, base.n_classes());
                let tags = [qi as u64, shift_index as u64, seed];
                let src_model = perturb(Arc::clone(&base), pc, rng::derive(p.seed, &[rng::tag("quality-source"), tags[0], tags[1], tags[2]]))
                    .map_err(|e| e.to_string())?;
                let tgt_model = perturb(Arc::clone(&base), pc, rng::derive(p.seed, &[rng::tag("quality-target"), tags[0], tags[1], tags[2]]))
                    .map_err(|e| e.to_string())?;
                let s = p.ctx.prepare_with_model(s_feat.clone(), &src_model).map_err(|e| e.to_string())?;
                let t = p.ctx.prepare_with_model(t_feat.clone(), &tgt_model).map_err(|e| e.to_string())?;
                let r = detect(&p.ctx, &s, &t, &spec, seed).map_err(|e| e.to_string())?;
                Ok(r.p_value)
            })();
            match result {
                Ok(pv) => cell(q, Some(pv), None),
                Err(e) => cell(q, None, Some(e)),
            }
        })
        .collect()
}

/// BBSDs power as the primary model degrades: for each quality, both sides
/// are scored by independently perturbed copies of the model at `size` rows.
pub fn model_quality_experiment(plan: &ExperimentPlan, qualities: &[f64], size: usize, jobs: usize) -> Result<QualityReport> {
    plan.validate()?;
    if qualities.is_empty() || qualities.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(BenchmarkError::InvalidPlan("qualities must be non-empty and inside [0, 1]".into()));
    }
    if size == 0 {
        return Err(BenchmarkError::InvalidPlan("size must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchmarkError::InvalidPlan(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| {
        let mut cells = Vec::new();
        for src in &plan.datasets {
            let p = prepare_dataset(plan, src)?;
            let tasks: Vec<(usize, u64)> = (0..plan.shifts.len())
                .filter(|&i| plan.shifts[i].kind != ShiftKind::NoShift)
                .flat_map(|i| plan.seeds.iter().map(move |&s| (i, s)))
                .collect();
            let chunks: Vec<Vec<QualityCell>> =
                tasks.par_iter().map(|&(i, seed)| cells_for(plan, &p, qualities, size, i, seed)).collect();
            cells.extend(chunks.into_iter().flatten());
        }
        let as_cells: Vec<CellResult> = cells
            .iter()
            .map(|c| CellResult {
                dataset: c.dataset.clone(),
                shift_index: c.shift_index,
                shift: c.shift.clone(),
                params: c.params.clone(),
                size,
                effective_size: size,
                seed: c.seed,
                detector: quality_label(c.quality),
                p_value: c.p_value,
                level: Some(c.level),
                detected: None,
                error: c.error.clone(),
            })
            .collect();
        let summary = aggregate(&as_cells, &[size]);
        let table = qualities
            .iter()
            .flat_map(|&q| {
                let label = quality_label(q);
                summary
                    .tpr
                    .iter()
                    .filter(move |t| t.detector == label)
                    .map(move |t| QualityEntry { quality: q, shift_type: t.shift_type.clone(), tpr: t.tpr, datasets: t.datasets })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(QualityReport { qualities: qualities.to_vec(), size, cells, table })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corruption_mapping() {
        assert_eq!(quality_to_corruption(1.0, 2), 0.0);
        assert_eq!(quality_to_corruption(0.5, 2), 1.0);
        assert!((quality_to_corruption(0.75, 2) - 0.5).abs() < 1e-12);
        assert!((quality_to_corruption(0.5, 3) - 0.75).abs() < 1e-12);
        assert_eq!(quality_to_corruption(0.2, 2), 1.0);
    }
}
