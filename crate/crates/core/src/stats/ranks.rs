use ndarray::Array2;

use super::special::chi2_sf;
use super::{Result, StatsError, TestResult};
use crate::scalar::{total_cmp, Real};

/// `q_{0.05,k}` for `k = 2..=10` (two-tailed studentized range / sqrt 2).
pub const NEMENYI_Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

/// Row-wise fractional ranks (rank 1 is best, ties share the mean rank) and
/// the column means.
pub fn average_ranks<T: Real>(scores: &Array2<T>, higher_is_better: bool) -> Result<(Array2<T>, Vec<T>)> {
    let (n, k) = scores.dim();
    if n == 0 || k == 0 {
        return Err(StatsError::InvalidShape(format!("{n} x {k} score matrix")));
    }
    let mut ranks = Array2::<T>::zeros((n, k));
    let mut order: Vec<usize> = Vec::with_capacity(k);
    for (i, row) in scores.rows().into_iter().enumerate() {
        order.clear();
        order.extend(0..k);
        order.sort_by(|&a, &b| {
            let o = total_cmp(&row[a], &row[b]);
            if higher_is_better { o.reverse() } else { o }
        });
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < k && row[order[end]] == row[order[start]] {
                end += 1;
            }
            // Positions start..end (0-based) share rank mean(start+1..=end).
            let r = T::of_usize(start + end + 1) / T::of(2.0);
            for &j in &order[start..end] {
                ranks[[i, j]] = r;
            }
            start = end;
        }
    }
    let means = (0..k)
        .map(|j| ranks.column(j).iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(n))
        .collect();
    Ok((ranks, means))
}

/// Friedman χ² statistic on an `N x k` rank matrix, with a χ²(k-1) p-value.
pub fn friedman_test<T: Real>(ranks: &Array2<T>) -> Result<TestResult<T>> {
    let (n, k) = ranks.dim();
    if n < 2 || k < 2 {
        return Err(StatsError::InvalidShape(format!("Friedman needs N >= 2 and k >= 2, got {n} x {k}")));
    }
    let (nf, kf) = (T::of_usize(n), T::of_usize(k));
    let sum_sq = (0..k).fold(T::zero(), |acc, j| {
        let m = ranks.column(j).iter().fold(T::zero(), |a, &b| a + b) / nf;
        acc + m * m
    });
    let k1 = kf + T::one();
    let mut stat = T::of(12.0) * nf / (kf * k1) * (sum_sq - kf * k1 * k1 / T::of(4.0));
    if stat < T::zero() && stat > -T::of(1e-9) {
        stat = T::zero();
    }
    let p = chi2_sf(stat, kf - T::one());
    Ok(TestResult { statistic: stat, p_value: p, n_source: n, n_target: k })
}

/// Nemenyi critical difference `q_{α,k} sqrt(k (k + 1) / (6 N))`.
pub fn nemenyi_cd<T: Real>(k: usize, n: usize, alpha: T) -> Result<T> {
    if (alpha.as_f64() - 0.05).abs() > 1e-12 {
        return Err(StatsError::UnsupportedAlpha(alpha.as_f64()));
    }
    if !(2..=10).contains(&k) {
        return Err(StatsError::UnsupportedK(k));
    }
    if n < 2 {
        return Err(StatsError::InvalidArgument(format!("need N >= 2 datasets, got {n}")));
    }
    let q = T::of(NEMENYI_Q_005[k - 2]);
    Ok(q * (T::of_usize(k * (k + 1)) / T::of_usize(6 * n)).sqrt())
}

/// Maximal sets of methods whose mean ranks all lie within `cd` of each other
/// (the bars of a critical-difference diagram). Members are listed best first.
pub fn nemenyi_groups<T: Real>(mean_ranks: &[T], cd: T) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..mean_ranks.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&mean_ranks[a], &mean_ranks[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = 0;
    for start in 0..order.len() {
        let mut end = start + 1;
        while end < order.len() && mean_ranks[order[end]] - mean_ranks[order[start]] <= cd {
            end += 1;
        }
        if end > last_end {
            groups.push(order[start..end].to_vec());
            last_end = end;
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tie_rule() {
        let (r, _) = average_ranks(&array![[5.0, 3.0, 3.0, 0.0]], true).unwrap();
        assert_eq!(r.row(0).to_vec(), vec![1.0, 2.5, 2.5, 4.0]);
        let (r, m) = average_ranks(&array![[2.0, 2.0, 2.0]], false).unwrap();
        assert_eq!(r.row(0).to_vec(), vec![2.0; 3]);
        assert_eq!(m, vec![2.0; 3]);
    }

    #[test]
    fn full_ties_give_p_one() {
        let ranks = Array2::from_elem((10, 4), 2.5f64);
        let r = friedman_test(&ranks).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn identical_permutations_reject() {
        let row = array![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ranks = Array2::from_shape_fn((21, 6), |(_, j)| row[j]);
        let r = friedman_test(&ranks).unwrap();
        // Maximal value N (k - 1) = 105.
        assert!((r.statistic - 105.0).abs() < 1e-9);
        assert!(r.p_value < 1e-15);
    }

    #[test]
    fn critical_difference() {
        let cd: f64 = nemenyi_cd(6, 21, 0.05).unwrap();
        assert!((cd - 2.850 * (42.0f64 / 126.0).sqrt()).abs() < 1e-12);
        let cd2: f64 = nemenyi_cd(2, 9, 0.05).unwrap();
        assert!((cd2 - 1.960 / 3.0).abs() < 1e-12);
        assert_eq!(nemenyi_cd::<f64>(11, 5, 0.05), Err(StatsError::UnsupportedK(11)));
        assert_eq!(nemenyi_cd::<f64>(3, 5, 0.1), Err(StatsError::UnsupportedAlpha(0.1)));
        let mut prev = f64::INFINITY;
        for n in 2..200 {
            let cd: f64 = nemenyi_cd(5, n, 0.05).unwrap();
            assert!(cd < prev);
            prev = cd;
        }
    }

    #[test]
    fn groups_are_maximal_runs() {
        let g = nemenyi_groups(&[1.0, 1.5, 3.0, 3.2, 5.0], 1.0);
        assert_eq!(g, vec![vec![0, 1], vec![2, 3], vec![4]]);
        let g = nemenyi_groups(&[1.0, 1.8, 2.6], 1.0);
        assert_eq!(g, vec![vec![0, 1], vec![1, 2]]);
    }
}
