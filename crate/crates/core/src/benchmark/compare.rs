use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{EfficiencyEntry, Summary};
use super::run::BenchmarkReport;
use super::Result;
use crate::detectors::DetectorSpec;
use crate::shift::ShiftKind;
use crate::stats::{average_ranks, friedman_test, nemenyi_cd, nemenyi_groups, StatsError};

/// Pseudo shift type averaging the efficiency scores of every type.
pub const ALL_TYPES: &str = "All";

/// Friedman test over efficiency ranks, with Nemenyi groups when it rejects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub shift_type: String,
    pub detectors: Vec<String>,
    pub datasets: usize,
    pub mean_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    pub significant: bool,
    pub cd: Option<f64>,
    /// Detector groups not separated by the critical difference, best first.
    pub groups: Option<Vec<Vec<String>>>,
    pub note: Option<String>,
}

/// Datasets × detectors score matrix for one shift type (or [`ALL_TYPES`]).
fn score_matrix(efficiency: &[EfficiencyEntry], shift_type: &str, detectors: &[String]) -> (Vec<String>, Array2<f64>) {
    let mut datasets: Vec<String> = Vec::new();
    for e in efficiency {
        if !datasets.contains(&e.dataset) {
            datasets.push(e.dataset.clone());
        }
    }
    let score = |ds: &str, det: &str| -> Option<f64> {
        let hits: Vec<f64> = efficiency
            .iter()
            .filter(|e| e.dataset == ds && e.detector == det && (shift_type == ALL_TYPES || e.shift_type == shift_type))
            .map(|e| f64::from(e.score))
            .collect();
        (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64)
    };
    // Keep datasets scored for every requested detector.
    let rows: Vec<(String, Vec<f64>)> = datasets
        .into_iter()
        .filter_map(|ds| detectors.iter().map(|d| score(&ds, d)).collect::<Option<Vec<f64>>>().map(|r| (ds, r)))
        .collect();
    let m = Array2::from_shape_fn((rows.len(), detectors.len()), |(i, j)| rows[i].1[j]);
    (rows.into_iter().map(|r| r.0).collect(), m)
}

pub(crate) fn compare_efficiency(
    efficiency: &[EfficiencyEntry],
    shift_type: &str,
    detectors: &[String],
) -> Result<Comparison> {
    if detectors.len() < 2 {
        return Err(StatsError::InvalidShape(format!("need at least 2 detectors, got {}", detectors.len())).into());
    }
    let (datasets, scores) = score_matrix(efficiency, shift_type, detectors);
    if datasets.len() < 2 {
        return Err(StatsError::InvalidShape(format!(
            "need at least 2 datasets scored on `{shift_type}`, got {}",
            datasets.len()
        ))
        .into());
    }
    let (ranks, mean_ranks) = average_ranks(&scores, true)?;
    let friedman = friedman_test(&ranks)?;
    let significant = friedman.p_value < 0.05;
    let (mut cd, mut groups, mut note) = (None, None, None);
    if significant {
        match nemenyi_cd(detectors.len(), datasets.len(), 0.05) {
            Ok(c) => {
                cd = Some(c);
                groups = Some(
                    nemenyi_groups(&mean_ranks, c)
                        .into_iter()
                        .map(|g| g.into_iter().map(|j| detectors[j].clone()).collect())
                        .collect(),
                );
            }
            Err(e) => note = Some(format!("no critical difference: {e}")),
        }
    }
    Ok(Comparison {
        shift_type: shift_type.to_owned(),
        detectors: detectors.to_vec(),
        datasets: datasets.len(),
        mean_ranks,
        friedman_statistic: friedman.statistic,
        friedman_p: friedman.p_value,
        significant,
        cd,
        groups,
        note,
    })
}

/// Compare `detectors` (default: every detector in the report) on one shift
/// type label, or on `"All"`.
pub fn compare_detectors(report: &BenchmarkReport, shift_type: &str, detectors: Option<&[String]>) -> Result<Comparison> {
    let all: Vec<String> = report.plan.detectors.iter().map(DetectorSpec::label).collect();
    let detectors = detectors.map_or(all, <[String]>::to_vec);
    let label = if shift_type.eq_ignore_ascii_case(ALL_TYPES) {
        ALL_TYPES.to_owned()
    } else {
        shift_type.parse::<ShiftKind>()?.label().to_owned()
    };
    compare_efficiency(&report.summary.efficiency, &label, &detectors)
}

/// Comparisons per shift type and overall, separately for fixed-level and
/// adaptive detectors. Types lacking two scored datasets are skipped.
pub(crate) fn family_comparisons(summary: &Summary, detectors: &[DetectorSpec]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for adaptive in [false, true] {
        let family: Vec<String> = detectors.iter().filter(|d| d.adaptive == adaptive).map(DetectorSpec::label).collect();
        if family.len() < 2 {
            continue;
        }
        let types = ShiftKind::TYPES.iter().map(|k| k.label()).chain(std::iter::once(ALL_TYPES));
        for t in types {
            if let Ok(c) = compare_efficiency(&summary.efficiency, t, &family) {
                out.push(c);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(scores: &[[u8; 3]]) -> Vec<EfficiencyEntry> {
        let mut v = Vec::new();
        for (i, row) in scores.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                v.push(EfficiencyEntry {
                    dataset: format!("d{i}"),
                    detector: ["A", "B", "C"][j].into(),
                    shift_type: "Knock-Out".into(),
                    score: s,
                });
            }
        }
        v
    }

    fn dets() -> Vec<String> {
        vec!["A".into(), "B".into(), "C".into()]
    }

    #[test]
    fn identical_scores_not_significant() {
        let c = compare_efficiency(&entries(&[[3, 3, 3]; 6]), "Knock-Out", &dets()).unwrap();
        assert_eq!(c.friedman_p, 1.0);
        assert!(!c.significant && c.groups.is_none() && c.cd.is_none());
    }

    #[test]
    fn dominant_detector_ranks_first() {
        let c = compare_efficiency(&entries(&[[5, 2, 1]; 12]), "Knock-Out", &dets()).unwrap();
        assert_eq!(c.mean_ranks[0], 1.0);
        assert!(c.significant);
        let groups = c.groups.unwrap();
        assert_eq!(groups[0][0], "A");
        assert!(c.cd.unwrap() > 0.0);
    }

    #[test]
    fn too_few_datasets() {
        assert!(compare_efficiency(&entries(&[[1, 2, 3]]), "Knock-Out", &dets()).is_err());
        assert!(compare_efficiency(&entries(&[[1, 2, 3]; 3]), "Knock-Out", &dets()[..1]).is_err());
    }
}
