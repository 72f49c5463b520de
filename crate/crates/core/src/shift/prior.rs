use rand::seq::SliceRandom;

use super::{floor_frac, Result, ShiftError, ShiftKind, ShiftOutcome, ShiftSpec};
use crate::rng;
use crate::tabular::Dataset;

fn labels(ds: &Dataset) -> Result<&[usize]> {
    ds.labels().ok_or(ShiftError::MissingLabels)
}

fn keep_rows(ds: &Dataset, removed: &[usize], spec: ShiftSpec) -> ShiftOutcome {
    let mut drop = vec![false; ds.n_rows()];
    for &i in removed {
        drop[i] = true;
    }
    let kept: Vec<usize> = (0..ds.n_rows()).filter(|&i| !drop[i]).collect();
    let mut affected: Vec<u64> = removed.iter().map(|&i| ds.row_ids()[i]).collect();
    affected.sort_unstable();
    ShiftOutcome { target: ds.select(&kept), applied: spec, affected_rows: affected, attack_failures: 0 }
}

/// Removes `⌊s·n_maj⌋` random rows of the majority class.
pub fn knock_out(ds: &Dataset, s: f64, seed: u64) -> Result<ShiftOutcome> {
    if !(0.0..1.0).contains(&s) {
        return Err(ShiftError::InvalidSpec(format!("Knock-Out needs s in [0, 1), got {s}")));
    }
    let y = labels(ds)?;
    let counts = ds.class_counts().ok_or(ShiftError::MissingLabels)?;
    let majority = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .ok_or(ShiftError::MissingLabels)?;
    let mut members: Vec<usize> = (0..ds.n_rows()).filter(|&i| y[i] == majority).collect();
    let remove = floor_frac(s, members.len());
    members.shuffle(&mut rng::from_seed(seed));
    members.truncate(remove);
    Ok(keep_rows(ds, &members, ShiftSpec::new(ShiftKind::KnockOut, Some(s), None).with_seed(seed)))
}

/// Keeps only the rows of the smallest present class.
pub fn only_one(ds: &Dataset, seed: u64) -> Result<ShiftOutcome> {
    let y = labels(ds)?;
    let counts = ds.class_counts().ok_or(ShiftError::MissingLabels)?;
    if counts.len() < 2 {
        return Err(ShiftError::InvalidSpec("Only-One needs at least two classes".into()));
    }
    let keep = counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(c, _)| c)
        .ok_or(ShiftError::MissingLabels)?;
    let removed: Vec<usize> = (0..ds.n_rows()).filter(|&i| y[i] != keep).collect();
    Ok(keep_rows(ds, &removed, ShiftSpec::new(ShiftKind::OnlyOne, None, None).with_seed(seed)))
}
