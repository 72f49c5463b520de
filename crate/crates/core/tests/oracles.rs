//! Kernels checked against independent brute-force or exact-arithmetic oracles.

use ndarray::{array, Array2};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use driftbench::linalg::{determinant, min_eigenpair, symmetric_eigen};
use driftbench::rng;
use driftbench::stats::{
    average_ranks, binomial_test_greater, chi2_homogeneity, empirical_quantile, friedman_test, kolmogorov_q, ks_statistic,
    ks_two_sample, nemenyi_cd, NEMENYI_Q_005,
};

/// Monte Carlo `P(D* >= D)` over random splits of the pooled sample.
fn ks_permutation(x: &[f64], y: &[f64], draws: usize, seed: u64) -> f64 {
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let obs = ks_statistic(x, y);
    let mut r = rng::from_seed(seed);
    let hits = (0..draws)
        .filter(|_| {
            pooled.shuffle(&mut r);
            let (a, b) = pooled.split_at(x.len());
            ks_statistic(a, b) >= obs - 1e-12
        })
        .count();
    hits as f64 / draws as f64
}

/// Brute-force `sup |F_x - F_y|` over a fine grid containing every data point.
fn ks_grid(x: &[f64], y: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    x.iter().chain(y).map(|&t| (ecdf(x, t) - ecdf(y, t)).abs()).fold(0.0, f64::max)
}

#[test]
fn ks_statistic_matches_ecdf_scan_with_ties() {
    for case in 0..200u64 {
        let mut r = rng::stream(5, &[case]);
        let n = r.random_range(1..30);
        let m = r.random_range(1..30);
        // Rounded draws produce many ties.
        let x: Vec<f64> = (0..n).map(|_| (r.sample::<f64, _>(StandardNormal) * 2.0).round()).collect();
        let y: Vec<f64> = (0..m).map(|_| (r.sample::<f64, _>(StandardNormal) * 2.0 + 0.5).round()).collect();
        assert!((ks_statistic(&x, &y) - ks_grid(&x, &y)).abs() < 1e-12, "case {case}");
    }
}

#[test]
fn ks_asymptotic_tracks_permutation_for_unequal_samples() {
    for (case, (n, m)) in [(30, 45), (40, 60), (25, 80)].into_iter().enumerate() {
        for rep in 0..4u64 {
            let mut r = rng::stream(6, &[case as u64, rep]);
            let x: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..m).map(|_| r.sample::<f64, _>(StandardNormal) + 0.2 * rep as f64).collect();
            let asym = ks_two_sample(&x, &y).unwrap().p_value;
            let perm = ks_permutation(&x, &y, 4000, case as u64 * 10 + rep);
            // Tight near the rejection region, loose in the bulk.
            let tol = if perm < 0.3 { 0.03 } else { 0.1 };
            assert!((asym - perm).abs() < tol, "n={n} m={m}: {asym} vs {perm}");
        }
    }
}

#[test]
fn kolmogorov_q_matches_direct_series() {
    for i in 1..60 {
        let lam = i as f64 * 0.05;
        let direct: f64 = 2.0 * (1..200).map(|j| (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64 * lam * lam).exp()).sum::<f64>();
        if lam >= 0.3 {
            assert!((kolmogorov_q(lam) - direct.clamp(0.0, 1.0)).abs() < 1e-10, "λ={lam}");
        }
    }
}

#[test]
fn ks_null_rejection_rate_is_nominal() {
    let trials = 2000;
    let mut rejections = 0;
    for t in 0..trials as u64 {
        let mut r = rng::stream(7, &[t]);
        let x: Vec<f64> = (0..500).map(|_| r.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..500).map(|_| r.sample(StandardNormal)).collect();
        rejections += usize::from(ks_two_sample(&x, &y).unwrap().p_value < 0.05);
    }
    let rate = rejections as f64 / trials as f64;
    assert!((0.03..=0.07).contains(&rate), "rate {rate}");
}

fn binomial_tail(s: usize, n: usize, p: &BigRational) -> BigRational {
    let q = BigRational::one() - p;
    let mut total = BigRational::zero();
    let mut choose = BigInt::one();
    for i in 0..=n {
        if i > 0 {
            choose = choose * BigInt::from(n - i + 1) / BigInt::from(i);
        }
        if i >= s {
            total += BigRational::from_integer(choose.clone()) * num::pow(p.clone(), i) * num::pow(q.clone(), n - i);
        }
    }
    total
}

#[test]
fn binomial_matches_exact_rational_sum() {
    for n in [1usize, 2, 7, 16, 33, 64, 150] {
        for (a, b) in [(1i64, 2i64), (1, 3), (4, 5)] {
            let p = BigRational::new(BigInt::from(a), BigInt::from(b));
            for s in (0..=n).step_by((n / 7).max(1)) {
                let got = binomial_test_greater(s, n, a as f64 / b as f64).unwrap().p_value;
                let want = binomial_tail(s, n, &p).to_f64().unwrap();
                assert!((got - want).abs() <= 1e-12, "s={s} n={n} p={a}/{b}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn binomial_rejects_bad_arguments() {
    assert!(binomial_test_greater(3, 2, 0.5).is_err());
    assert!(binomial_test_greater(0, 0, 0.5).is_err());
    assert!(binomial_test_greater(1, 2, 1.0).is_err());
}

#[test]
fn chi2_matches_resampling_oracle_on_spec_table() {
    let (a, b) = ([30usize, 10], [10usize, 30]);
    let t = chi2_homogeneity::<f64>(&a, &b).unwrap();
    assert!((t.statistic - 20.0).abs() < 1e-12);
    // Tail is tiny: the oracle sees no exceedance in 50 000 draws either.
    let mut r = rng::from_seed(3);
    let mut hits = 0;
    for _ in 0..50_000 {
        let draw = |n: usize, r: &mut driftbench::rng::Rng| {
            let k = (0..n).filter(|_| r.random::<f64>() < 0.5).count();
            [k, n - k]
        };
        let (x, y) = (draw(40, &mut r), draw(40, &mut r));
        hits += usize::from(chi2_homogeneity::<f64>(&x, &y).unwrap().statistic >= 20.0 - 1e-9);
    }
    assert!((t.p_value - hits as f64 / 50_000.0).abs() < 0.02);
    let degenerate = chi2_homogeneity::<f64>(&[10, 0], &[10, 0]).unwrap();
    assert_eq!((degenerate.statistic, degenerate.p_value), (0.0, 1.0));
}

#[test]
fn friedman_matches_rank_sum_formula() {
    let scores = array![[1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 4.0, 3.0], [1.0, 3.0, 2.0, 4.0], [4.0, 4.0, 1.0, 2.0], [3.0, 1.0, 2.0, 4.0]];
    let (ranks, means) = average_ranks(&scores, false).unwrap();
    // Tied row 4 shares ranks 3.5.
    assert_eq!(ranks.row(3).to_vec(), vec![3.5, 3.5, 1.0, 2.0]);
    let (n, k) = (5.0, 4.0);
    let sums: Vec<f64> = (0..4).map(|j| ranks.column(j).sum()).collect();
    let hand = 12.0 / (n * k * (k + 1.0)) * sums.iter().map(|s| s * s).sum::<f64>() - 3.0 * n * (k + 1.0);
    assert!((friedman_test(&ranks).unwrap().statistic - hand).abs() < 1e-9);
    assert!((means.iter().sum::<f64>() - 10.0).abs() < 1e-12);
}

#[test]
fn nemenyi_cd_uses_embedded_table() {
    for k in 2..=10 {
        let want = NEMENYI_Q_005[k - 2] * ((k * (k + 1)) as f64 / (6.0 * 21.0)).sqrt();
        assert!((nemenyi_cd(k, 21, 0.05).unwrap() - want).abs() < 1e-12);
    }
    assert!(nemenyi_cd::<f64>(11, 21, 0.05).is_err());
    assert!(nemenyi_cd::<f64>(3, 21, 0.1).is_err());
}

#[test]
fn empirical_quantile_is_lower_order_statistic() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(empirical_quantile(&v, 0.05).unwrap(), 5.0);
    assert_eq!(empirical_quantile(&v, 0.0).unwrap(), 1.0);
    assert_eq!(empirical_quantile(&v, 1.0).unwrap(), 100.0);
    assert_eq!(empirical_quantile(&[0.3, 0.1, 0.2], 0.5).unwrap(), 0.2);
}

#[test]
fn symmetric_eigen_matches_closed_form_2x2() {
    for case in 0..50u64 {
        let mut r = rng::stream(8, &[case]);
        let (a, b, c): (f64, f64, f64) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let m = array![[a, b], [b, c]];
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        let mid = (a + c) / 2.0;
        let rad = (((a - c) / 2.0).powi(2) + b * b).sqrt();
        assert!((vals[0] - (mid + rad)).abs() < 1e-10 && (vals[1] - (mid - rad)).abs() < 1e-10);
        for j in 0..2 {
            let v = vecs.column(j).to_owned();
            assert!((m.dot(&v) - &v * vals[j]).mapv(f64::abs).sum() < 1e-8);
        }
    }
}

#[test]
fn min_eigenpair_on_column_stochastic_matrices() {
    for case in 0..30u64 {
        let mut r = rng::stream(9, &[case]);
        let (p, q): (f64, f64) = (r.random_range(0.55..0.99), r.random_range(0.55..0.99));
        let c = array![[p, 1.0 - q], [1.0 - p, q]];
        let (lam, v) = min_eigenpair(&c).unwrap();
        // Eigenvalues of a 2x2 stochastic matrix are 1 and p + q - 1.
        assert!((lam - (p + q - 1.0)).abs() < 1e-9, "{lam} vs {}", p + q - 1.0);
        assert!((c.dot(&v) - &v * lam).mapv(|x| x * x).sum().sqrt() < 1e-8);
        assert!(v.sum().abs() < 1e-8);
        assert!((determinant(&c).unwrap() - lam).abs() < 1e-9);
    }
}

#[test]
fn determinant_matches_cofactor_expansion() {
    fn cofactor(m: &Array2<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[[0, 0]];
        }
        (0..n)
            .map(|j| {
                let minor = Array2::from_shape_fn((n - 1, n - 1), |(r, c)| m[[r + 1, if c < j { c } else { c + 1 }]]);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[[0, j]] * cofactor(&minor)
            })
            .sum()
    }
    for case in 0..20u64 {
        let mut r = rng::stream(10, &[case]);
        let n = 1 + (case as usize % 4);
        let m = Array2::from_shape_fn((n, n), |_| r.random_range(-2.0..2.0));
        assert!((determinant(&m).unwrap() - cofactor(&m)).abs() < 1e-9);
    }
}
