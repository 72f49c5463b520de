use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::detectors::detection_decision;

use super::run::CellResult;
use super::{BenchmarkError, Result};
use crate::shift::ShiftKind;

/// `|sizes| − i` for the smallest size index `i` with a detection, 0 if none.
pub fn efficiency_score(detected_by_size: &BTreeMap<usize, bool>, sizes: &[usize]) -> Result<u8> {
    for (i, size) in sizes.iter().enumerate() {
        match detected_by_size.get(size) {
            None => return Err(BenchmarkError::MissingSize(*size)),
            Some(true) => return Ok((sizes.len() - i) as u8),
            Some(false) => {}
        }
    }
    Ok(0)
}

/// Mean detection rate of one detector on one shift type at one size, over datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TprEntry {
    pub detector: String,
    pub shift_type: String,
    pub size: usize,
    pub tpr: f64,
    pub datasets: usize,
}

/// Fraction of correct decisions over every shifted parameterization plus
/// the no-shift negatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEntry {
    pub detector: String,
    pub size: usize,
    pub accuracy: f64,
    pub positives: usize,
    pub negatives: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEntry {
    pub dataset: String,
    pub detector: String,
    pub shift_type: String,
    pub score: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tpr: Vec<TprEntry>,
    pub accuracy: Vec<AccuracyEntry>,
    pub efficiency: Vec<EfficiencyEntry>,
    pub failed_cells: usize,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_owned());
        }
    }
    out
}

/// Recompute every table from raw cells: p-values are averaged over seeds,
/// compared with the cell level, and decisions averaged over the
/// parameterizations of each shift type. Failed cells are excluded.
pub fn aggregate(cells: &[CellResult], sizes: &[usize]) -> Summary {
    let datasets = first_seen(cells.iter().map(|c| c.dataset.as_str()));
    let detectors = first_seen(cells.iter().map(|c| c.detector.as_str()));
    let failed_cells = cells.iter().filter(|c| c.p_value.is_none()).count();

    // (dataset, detector, shift index, size) -> (Σp, n, level, kind)
    let mut pooled: BTreeMap<(&str, &str, usize, usize), (f64, usize, f64, ShiftKind)> = BTreeMap::new();
    for c in cells {
        let (Some(p), Some(level)) = (c.p_value, c.level) else { continue };
        let Ok(kind) = c.shift.parse::<ShiftKind>() else { continue };
        let e = pooled.entry((&c.dataset, &c.detector, c.shift_index, c.size)).or_insert((0.0, 0, level, kind));
        e.0 += p;
        e.1 += 1;
    }
    // (dataset, detector, kind, size) -> decisions of the parameterizations
    let mut by_type: BTreeMap<(&str, &str, ShiftKind, usize), Vec<bool>> = BTreeMap::new();
    for (&(ds, det, _, size), &(sum, n, level, kind)) in &pooled {
        by_type.entry((ds, det, kind, size)).or_default().push(detection_decision(sum / n as f64, level));
    }
    let rate = |v: &[bool]| v.iter().filter(|&&d| d).count() as f64 / v.len() as f64;

    let mut summary = Summary { failed_cells, ..Summary::default() };
    for det in &detectors {
        for kind in ShiftKind::TYPES {
            for &size in sizes {
                let rates: Vec<f64> = datasets
                    .iter()
                    .filter_map(|ds| by_type.get(&(ds.as_str(), det.as_str(), kind, size)))
                    .map(|v| rate(v))
                    .collect();
                if !rates.is_empty() {
                    summary.tpr.push(TprEntry {
                        detector: det.clone(),
                        shift_type: kind.label().to_owned(),
                        size,
                        tpr: rates.iter().sum::<f64>() / rates.len() as f64,
                        datasets: rates.len(),
                    });
                }
            }
        }
        for &size in sizes {
            let (mut positives, mut negatives, mut correct) = (0, 0, 0);
            for ((_, d, kind, s), decisions) in &by_type {
                if *d != det.as_str() || *s != size {
                    continue;
                }
                for &hit in decisions {
                    if *kind == ShiftKind::NoShift {
                        negatives += 1;
                        correct += usize::from(!hit);
                    } else {
                        positives += 1;
                        correct += usize::from(hit);
                    }
                }
            }
            let total = positives + negatives;
            if total > 0 {
                summary.accuracy.push(AccuracyEntry {
                    detector: det.clone(),
                    size,
                    accuracy: correct as f64 / total as f64,
                    positives,
                    negatives,
                    correct,
                });
            }
        }
    }
    for ds in &datasets {
        for det in &detectors {
            for kind in ShiftKind::TYPES {
                let flags: BTreeMap<usize, bool> = sizes
                    .iter()
                    .map(|&s| (s, by_type.get(&(ds.as_str(), det.as_str(), kind, s)).is_some_and(|v| rate(v) >= 0.5)))
                    .collect();
                if sizes.iter().any(|&s| by_type.contains_key(&(ds.as_str(), det.as_str(), kind, s))) {
                    summary.efficiency.push(EfficiencyEntry {
                        dataset: ds.clone(),
                        detector: det.clone(),
                        shift_type: kind.label().to_owned(),
                        score: efficiency_score(&flags, sizes).expect("flags cover every size"),
                    });
                }
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_mapping() {
        let sizes = [10, 100, 500, 1000, 2000];
        let flags = |first: Option<usize>| -> BTreeMap<usize, bool> {
            sizes.iter().map(|&s| (s, first.is_some_and(|f| s >= f))).collect()
        };
        let expected = [(Some(10), 5), (Some(100), 4), (Some(500), 3), (Some(1000), 2), (Some(2000), 1), (None, 0)];
        for (first, score) in expected {
            assert_eq!(efficiency_score(&flags(first), &sizes).unwrap(), score);
        }
        let mut partial = flags(None);
        partial.remove(&500);
        assert!(matches!(efficiency_score(&partial, &sizes), Err(BenchmarkError::MissingSize(500))));
    }

    fn cell(det: &str, shift: &str, idx: usize, size: usize, seed: u64, p: f64) -> CellResult {
        CellResult {
            dataset: "d".into(),
            shift_index: idx,
            shift: shift.into(),
            params: String::new(),
            size,
            effective_size: size,
            seed,
            detector: det.into(),
            p_value: Some(p),
            level: Some(0.05),
            detected: Some(p < 0.05),
            error: None,
        }
    }

    #[test]
    fn seeds_average_before_deciding() {
        // Seed p-values 0.01 and 0.2: each alone differs, the mean 0.105 does not detect.
        let cells = vec![
            cell("A", "Knock-Out", 0, 10, 0, 0.01),
            cell("A", "Knock-Out", 0, 10, 1, 0.2),
            cell("A", "Knock-Out", 1, 10, 0, 0.01),
            cell("A", "Knock-Out", 1, 10, 1, 0.02),
            cell("A", "No Shift", 2, 10, 0, 0.5),
            cell("A", "No Shift", 2, 10, 1, 0.5),
        ];
        let s = aggregate(&cells, &[10]);
        assert_eq!(s.tpr.len(), 1);
        assert_eq!(s.tpr[0].tpr, 0.5);
        assert_eq!(s.accuracy[0].positives, 2);
        assert_eq!(s.accuracy[0].negatives, 1);
        assert_eq!(s.accuracy[0].correct, 2);
        assert_eq!(s.efficiency[0].score, 1);
    }
}
