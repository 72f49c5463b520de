use ndarray::{Array2, ArrayView1};
use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::{choose_rows, floor_frac, Result, ShiftError, ShiftKind, ShiftOutcome, ShiftSpec};
use crate::rng;
use crate::tabular::{Cell, Dataset, Encoder};

fn outcome(ds: &Dataset, kept: &[usize], spec: ShiftSpec) -> ShiftOutcome {
    let mut keep = vec![false; ds.n_rows()];
    for &i in kept {
        keep[i] = true;
    }
    let affected = (0..ds.n_rows()).filter(|&i| !keep[i]).map(|i| ds.row_ids()[i]).collect();
    ShiftOutcome { target: ds.select(kept), applied: spec, affected_rows: affected, attack_failures: 0 }
}

/// Keep-filter with one retry on an empty result.
fn filter_nonempty(n: usize, seed: u64, mut keep: impl FnMut(&mut rng::Rng) -> Vec<usize>) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    for attempt in 0..2u64 {
        let kept = keep(&mut rng::stream(seed, &[rng::tag("selection"), attempt]));
        if !kept.is_empty() {
            return Ok(kept);
        }
    }
    Err(ShiftError::EmptyResult)
}

fn numeric_block(ds: &Dataset, encoder: &Encoder) -> Result<Array2<f64>> {
    let coords = encoder.numeric_coordinates();
    if coords.is_empty() {
        return Err(ShiftError::NoNumericFeatures);
    }
    let enc = encoder.encode::<f64>(ds)?;
    let idx: Vec<usize> = coords.iter().map(|&(_, e)| e).collect();
    Ok(enc.values.select(ndarray::Axis(1), &idx))
}

/// Keeps row i with probability `exp(−γ·d²ᵢ/M)`, where d² is the squared
/// distance to the mean in encoded numeric space and M its median.
pub fn joint_subsampling(ds: &Dataset, encoder: &Encoder, seed: u64, gamma: f64) -> Result<ShiftOutcome> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(ShiftError::InvalidSpec(format!("gamma {gamma} must be finite and non-negative")));
    }
    let x = numeric_block(ds, encoder)?;
    let probs = keep_probabilities(&x, gamma);
    let kept = filter_nonempty(ds.n_rows(), seed, |r| (0..probs.len()).filter(|&i| r.random::<f64>() < probs[i]).collect())?;
    Ok(outcome(ds, &kept, ShiftSpec::new(ShiftKind::JointSubsampling, None, None).with_seed(seed)))
}

pub(crate) fn keep_probabilities(x: &Array2<f64>, gamma: f64) -> Vec<f64> {
    let n = x.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let d2: Vec<f64> = x.rows().into_iter().map(|r| (&r - &mean).mapv(|v| v * v).sum()).collect();
    let mut sorted = d2.clone();
    sorted.sort_by(f64::total_cmp);
    let m = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    d2.iter()
        .map(|&d| match (gamma == 0.0, m > 0.0) {
            (true, _) => 1.0,
            (false, true) => (-gamma * d / m).exp(),
            (false, false) => f64::from(u8::from(d <= 0.0)),
        })
        .collect()
}

/// For each of `⌊f·d_num⌋` numeric features, rows below its median are kept
/// with probability `p_low`.
pub fn feature_subsampling(ds: &Dataset, f: f64, seed: u64, p_low: f64) -> Result<ShiftOutcome> {
    if !(0.0..=1.0).contains(&p_low) {
        return Err(ShiftError::InvalidSpec(format!("p_low {p_low} outside [0, 1]")));
    }
    let numeric = ds.numeric_columns();
    if numeric.is_empty() {
        return Err(ShiftError::NoNumericFeatures);
    }
    let features: Vec<usize> = choose_rows(numeric.len(), floor_frac(f, numeric.len()), &mut rng::stream(seed, &[rng::tag("features")]))
        .into_iter()
        .map(|j| numeric[j])
        .collect();
    let medians: Vec<f64> = features.iter().map(|&j| column_median(ds, j)).collect();
    let kept = filter_nonempty(ds.n_rows(), seed, |r| {
        let mut alive = vec![true; ds.n_rows()];
        for (&j, &med) in features.iter().zip(&medians) {
            for (i, row) in ds.rows().iter().enumerate() {
                let low = matches!(row[j], Cell::Num(v) if v < med);
                let u = r.random::<f64>();
                if low && u >= p_low {
                    alive[i] = false;
                }
            }
        }
        (0..ds.n_rows()).filter(|&i| alive[i]).collect()
    })?;
    Ok(outcome(ds, &kept, ShiftSpec::new(ShiftKind::Subsampling, None, Some(f)).with_seed(seed)))
}

fn column_median(ds: &Dataset, col: usize) -> f64 {
    let mut v: Vec<f64> = ds.rows().iter().filter_map(|r| r[col].as_num()).collect();
    if v.is_empty() {
        return f64::NEG_INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn smallest_class(counts: &[usize]) -> Option<usize> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(c, _)| c)
}

/// Keeps the minority class and the non-minority rows closest to it (mean
/// distance to their `neighbors` nearest minority rows) until `⌈s·n⌉` rows.
pub fn under_sampling_nearmiss3(
    ds: &Dataset,
    encoder: &Encoder,
    s: f64,
    seed: u64,
    neighbors: usize,
) -> Result<ShiftOutcome> {
    let y = ds.labels().ok_or(ShiftError::MissingLabels)?;
    if !(0.0..=1.0).contains(&s) || neighbors == 0 {
        return Err(ShiftError::InvalidSpec(format!("under-sampling needs s in [0, 1] and neighbors ≥ 1 (s={s})")));
    }
    let spec = ShiftSpec::new(ShiftKind::UnderSampling, Some(s), None).with_seed(seed);
    let n = ds.n_rows();
    let target = ((s * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let counts = ds.class_counts().ok_or(ShiftError::MissingLabels)?;
    let Some(minority) = smallest_class(&counts) else {
        return Ok(outcome(ds, &[], spec));
    };
    let minority_rows: Vec<usize> = (0..n).filter(|&i| y[i] == minority).collect();
    if minority_rows.len() >= target {
        let pick = choose_rows(minority_rows.len(), target, &mut rng::stream(seed, &[rng::tag("minority")]));
        let kept: Vec<usize> = pick.into_iter().map(|i| minority_rows[i]).collect();
        return Ok(outcome(ds, &kept, spec));
    }
    let x = encoder.encode::<f64>(ds)?.values;
    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|&i| y[i] != minority)
        .map(|i| {
            let mut d: Vec<f64> = minority_rows.iter().map(|&m| dist(x.row(i), x.row(m))).collect();
            d.sort_by(f64::total_cmp);
            let k = neighbors.min(d.len());
            (d[..k].iter().sum::<f64>() / k as f64, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut kept = minority_rows;
    kept.extend(scored.iter().take(target - kept.len()).map(|&(_, i)| i));
    kept.sort_unstable();
    Ok(outcome(ds, &kept, spec))
}

/// Replaces `⌊s·n⌋` random rows with interpolations between a retained row
/// and one of its `neighbors` nearest same-class retained rows.
pub fn over_sampling_interpolation(
    ds: &Dataset,
    encoder: &Encoder,
    s: f64,
    seed: u64,
    neighbors: usize,
) -> Result<ShiftOutcome> {
    let y = ds.labels().ok_or(ShiftError::MissingLabels)?;
    if !(0.0..=1.0).contains(&s) || neighbors == 0 {
        return Err(ShiftError::InvalidSpec(format!("over-sampling needs s in [0, 1] and neighbors ≥ 1 (s={s})")));
    }
    let spec = ShiftSpec::new(ShiftKind::OverSampling, Some(s), None).with_seed(seed);
    let n = ds.n_rows();
    let mut r = rng::stream(seed, &[rng::tag("oversample")]);
    let removed = choose_rows(n, floor_frac(s, n), &mut r);
    if removed.is_empty() {
        return Ok(ShiftOutcome { target: ds.clone(), applied: spec, affected_rows: Vec::new(), attack_failures: 0 });
    }
    let mut is_removed = vec![false; n];
    for &i in &removed {
        is_removed[i] = true;
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count()];
    for i in (0..n).filter(|&i| !is_removed[i]) {
        by_class[y[i]].push(i);
    }
    if let Some((class, rows)) = by_class.iter().enumerate().find(|(_, v)| v.len() == 1) {
        return Err(ShiftError::ClassTooSmall { class, rows: rows.len() });
    }
    let classes: Vec<usize> = (0..by_class.len()).filter(|&c| by_class[c].len() >= 2).collect();
    if classes.is_empty() {
        return Err(ShiftError::ClassTooSmall { class: 0, rows: 0 });
    }
    let x = encoder.encode::<f64>(ds)?.values;
    let numeric = ds.numeric_columns();
    let mut cells = ds.rows().to_vec();
    let mut labels = y.to_vec();
    let mut ids = ds.row_ids().to_vec();
    let mut next_id = ds.max_row_id().map_or(0, |m| m + 1);
    for &slot in &removed {
        let class = *classes.choose(&mut r).expect("non-empty");
        let members = &by_class[class];
        let a = *members.choose(&mut r).expect("non-empty");
        let mut near: Vec<(f64, usize)> =
            members.iter().filter(|&&m| m != a).map(|&m| (dist(x.row(a), x.row(m)), m)).collect();
        near.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        near.truncate(neighbors);
        let b = near.choose(&mut r).expect("class has two rows").1;
        let u: f64 = r.random();
        let mut row = ds.row(a).to_vec();
        for &j in &numeric {
            if let (Cell::Num(va), Cell::Num(vb)) = (ds.row(a)[j], ds.row(b)[j]) {
                row[j] = Cell::Num(va + u * (vb - va));
            }
        }
        cells[slot] = row;
        labels[slot] = class;
        ids[slot] = next_id;
        next_id += 1;
    }
    Ok(ShiftOutcome {
        target: ds.with_rows(cells, Some(labels), ids)?,
        applied: spec,
        affected_rows: removed.iter().map(|&i| ds.row_ids()[i]).collect(),
        attack_failures: 0,
    })
}
