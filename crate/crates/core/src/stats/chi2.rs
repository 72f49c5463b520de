use super::special::chi2_sf;
use super::{Result, StatsError, TestResult};
use crate::scalar::Real;

/// χ² test of homogeneity on a `2 x k` table of counts.
///
/// Categories with zero combined count are dropped; with one category left the
/// test is degenerate and returns statistic 0, p = 1.
pub fn chi2_homogeneity<T: Real>(source: &[usize], target: &[usize]) -> Result<TestResult<T>> {
    if source.len() != target.len() {
        return Err(StatsError::InvalidArgument(format!(
            "count vectors differ in length ({} vs {})",
            source.len(),
            target.len()
        )));
    }
    let ns: usize = source.iter().sum();
    let nt: usize = target.iter().sum();
    if ns == 0 || nt == 0 {
        return Err(StatsError::EmptySample);
    }
    let total = T::of_usize(ns + nt);
    let (fs, ft) = (T::of_usize(ns) / total, T::of_usize(nt) / total);
    let mut stat = T::zero();
    let mut kept = 0usize;
    for (&a, &b) in source.iter().zip(target) {
        let col = a + b;
        if col == 0 {
            continue;
        }
        kept += 1;
        let c = T::of_usize(col);
        let (ea, eb) = (c * fs, c * ft);
        let (da, db) = (T::of_usize(a) - ea, T::of_usize(b) - eb);
        stat += da * da / ea + db * db / eb;
    }
    if kept <= 1 {
        return Ok(TestResult { statistic: T::zero(), p_value: T::one(), n_source: ns, n_target: nt });
    }
    let p = chi2_sf(stat, T::of_usize(kept - 1));
    Ok(TestResult { statistic: stat, p_value: p, n_source: ns, n_target: nt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_tables() {
        let r: TestResult = chi2_homogeneity(&[50, 50], &[50, 50]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r: TestResult = chi2_homogeneity(&[10, 0], &[10, 0]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn two_by_two_matches_hand_value() {
        // Expected 20 in every cell: stat = 4 * 100 / 20 = 20, df = 1.
        let r: TestResult = chi2_homogeneity(&[30, 10], &[10, 30]).unwrap();
        assert!((r.statistic - 20.0).abs() < 1e-12);
        assert!((r.p_value - 7.744_216_431_044_086e-6).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(chi2_homogeneity::<f64>(&[0, 0], &[1, 2]), Err(StatsError::EmptySample));
        assert!(chi2_homogeneity::<f64>(&[1], &[1, 2]).is_err());
    }
}
