use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{BenchmarkError, Result};
use crate::detectors::{detect, DetectorContext, DetectorName, DetectorSpec};
use crate::forest::{argmax, ConfusionMatrix};
use crate::linalg::min_eigenpair;
use crate::rng;
use crate::tabular::Dataset;

/// Minimum-eigenpair view of a column-stochastic confusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenAnalysis {
    pub c: Array2<f64>,
    pub p_source: Vec<f64>,
    pub lambda_min: f64,
    pub v_min: Vec<f64>,
    /// Widest `[α_min, α_max]` keeping `p_S + α·v_min` inside `[0, 1]`.
    pub alpha_range: [f64; 2],
}

impl EigenAnalysis {
    pub fn from_confusion(c: &Array2<f64>, p_source: &[f64]) -> Result<Self> {
        if c.nrows() != p_source.len() {
            return Err(BenchmarkError::InvalidPlan(format!(
                "{} class priors for a {}x{} confusion matrix",
                p_source.len(),
                c.nrows(),
                c.ncols()
            )));
        }
        let (lambda_min, mut v) = min_eigenpair(c)?;
        // A repeated eigenvalue (e.g. C = I) leaves the direction free; take
        // the one that keeps the prior normalized.
        let mean = v.sum() / v.len() as f64;
        if mean.abs() > 1e-9 {
            let mut w = v.mapv(|x| x - mean);
            let n = w.mapv(|x| x * x).sum().sqrt();
            if n > 0.0 {
                w /= n;
            }
            if n == 0.0 || (c.dot(&w) - &w * lambda_min).mapv(|x| x * x).sum().sqrt() > 1e-8 {
                return Err(BenchmarkError::InfeasibleShift);
            }
            v = w;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (&p, &vi) in p_source.iter().zip(v.iter()) {
            if vi.abs() < 1e-15 {
                continue;
            }
            let (a, b) = (-p / vi, (1.0 - p) / vi);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi - lo <= 0.0 {
            return Err(BenchmarkError::InfeasibleShift);
        }
        Ok(Self { c: c.clone(), p_source: p_source.to_vec(), lambda_min, v_min: v.to_vec(), alpha_range: [lo, hi] })
    }

    pub fn target_prior(&self, alpha: f64) -> Vec<f64> {
        self.p_source.iter().zip(&self.v_min).map(|(p, v)| (p + alpha * v).clamp(0.0, 1.0)).collect()
    }

    /// `‖C·(α·v_min)‖₂`: the gap between predicted class distributions.
    pub fn predicted_gap(&self, alpha: f64) -> f64 {
        let shift = Array1::from(self.v_min.clone()) * alpha;
        self.c.dot(&shift).mapv(|x| x * x).sum().sqrt()
    }

    /// `count` evenly spaced values across the feasible range.
    pub fn alpha_grid(&self, count: usize) -> Vec<f64> {
        let [lo, hi] = self.alpha_range;
        match count {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub alpha: f64,
    /// `‖p_S − p_T‖₂`.
    pub prior_gap: f64,
    /// `|α·λ_min|` computed as `‖C·(α·v_min)‖₂`.
    pub predicted_gap: f64,
    /// `‖p̂_S − p̂_T‖₂` from the model's hard predictions.
    pub empirical_gap: Option<f64>,
    pub bbsds_p: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenShiftResult {
    pub confusion: ConfusionMatrix<f64>,
    pub analysis: EigenAnalysis,
    pub records: Vec<EigenRecord>,
}

fn histogram(pred: &[usize], k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k];
    for &p in pred {
        h[p] += 1.0;
    }
    let n = pred.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Largest-remainder integer counts summing to `n`.
fn apportion(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n.saturating_sub(counts.iter().sum());
    for &j in order.iter().cycle().take(left * p.len().max(1)) {
        if left == 0 {
            break;
        }
        counts[j] += 1;
        left -= 1;
    }
    counts
}

/// Prior shifts along the confusion matrix's minimum eigenvector. The
/// evaluation rows are split into halves; the second half is resampled per
/// class (with replacement) to realize each target prior and compared with
/// the first half by BBSDs.
pub fn eigen_shift_experiment(
    ctx: &DetectorContext<f64>,
    eval: &Dataset,
    alphas: usize,
    seed: u64,
) -> Result<EigenShiftResult> {
    let y = eval.labels().ok_or_else(|| BenchmarkError::InvalidPlan("eigen-shift needs a labeled evaluation set".into()))?;
    let k = eval.class_count();
    let prepared = ctx.prepare(eval)?;
    let proba = prepared.proba.as_ref().ok_or_else(|| BenchmarkError::InvalidPlan("no primary model".into()))?;
    let pred: Vec<usize> = proba.rows().into_iter().map(|r| argmax(r.as_slice().expect("contiguous row"))).collect();
    let confusion = ConfusionMatrix::<f64>::from_predictions(&pred, y, k)?;

    let mut perm: Vec<usize> = (0..eval.n_rows()).collect();
    perm.shuffle(&mut rng::stream(seed, &[rng::tag("eigen-split")]));
    let (src_rows, pool_rows) = perm.split_at(eval.n_rows() / 2);
    let p_source = histogram(&src_rows.iter().map(|&i| y[i]).collect::<Vec<_>>(), k);
    let analysis = EigenAnalysis::from_confusion(&confusion.c, &p_source)?;

    let source = prepared.select(src_rows);
    let src_hist = histogram(&src_rows.iter().map(|&i| pred[i]).collect::<Vec<_>>(), k);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &i in pool_rows {
        by_class[y[i]].push(i);
    }
    let spec = DetectorSpec::fixed(DetectorName::BBSDs);
    let records = analysis
        .alpha_grid(alphas)
        .into_iter()
        .enumerate()
        .map(|(a_idx, alpha)| {
            let p_t = analysis.target_prior(alpha);
            let prior_gap = p_t.iter().zip(&p_source).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let mut rec = EigenRecord {
                alpha,
                prior_gap,
                predicted_gap: analysis.predicted_gap(alpha),
                empirical_gap: None,
                bbsds_p: None,
                error: None,
            };
            let counts = apportion(&p_t, pool_rows.len());
            let mut r = rng::stream(seed, &[rng::tag("eigen-resample"), a_idx as u64]);
            let mut rows = Vec::with_capacity(pool_rows.len());
            for (c, &m) in counts.iter().enumerate() {
                if m > 0 && by_class[c].is_empty() {
                    rec.error = Some(format!("class {c} has no evaluation rows to resample"));
                    return rec;
                }
                rows.extend((0..m).map(|_| by_class[c][r.random_range(0..by_class[c].len())]));
            }
            let target = prepared.select(&rows);
            let tgt_hist = histogram(&rows.iter().map(|&i| pred[i]).collect::<Vec<_>>(), k);
            rec.empirical_gap = Some(src_hist.iter().zip(&tgt_hist).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
            match detect(ctx, &source, &target, &spec, rng::derive(seed, &[a_idx as u64])) {
                Ok(d) => rec.bbsds_p = Some(d.p_value),
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect();
    Ok(EigenShiftResult { confusion, analysis, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn symmetric_two_class_identity() {
        let c = array![[0.55, 0.45], [0.45, 0.55]];
        let a = EigenAnalysis::from_confusion(&c, &[0.5, 0.5]).unwrap();
        assert!((a.lambda_min - 0.1).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a.v_min[0] - s).abs() < 1e-9 && (a.v_min[1] + s).abs() < 1e-9, "{:?}", a.v_min);
        assert!(a.alpha_range[0] <= 0.0 && a.alpha_range[1] >= 0.0);
        assert!((a.predicted_gap(0.2) - 0.02).abs() < 1e-12);
        let p = a.target_prior(0.2);
        let gap: f64 = p.iter().zip(&a.p_source).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((gap - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identity_matrix_shift_fully_visible() {
        let a = EigenAnalysis::from_confusion(&Array2::eye(2), &[0.3, 0.7]).unwrap();
        assert!((a.lambda_min - 1.0).abs() < 1e-12);
        assert!(a.v_min.iter().sum::<f64>().abs() < 1e-12);
        for alpha in a.alpha_grid(5) {
            assert!((a.predicted_gap(alpha) - alpha.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(&[0.5, 0.5], 7).iter().sum::<usize>(), 7);
        assert_eq!(apportion(&[1.0, 0.0], 4), vec![4, 0]);
        assert_eq!(apportion(&[0.25, 0.75], 8), vec![2, 6]);
    }
}
