//! Property tests over kernels, models, simulators and detectors.

use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use driftbench::benchmark::{self, efficiency_score, ExperimentPlan};
use driftbench::detectors::{
    calibrate, detect, ContextConfig, DetectorContext, DetectorName, DetectorSpec, PreparedSample,
};
use driftbench::forest::{perturb, Classifier, FeatureSubset, ForestConfig, RandomForest};
use driftbench::linalg::min_eigenpair;
use driftbench::projections::{PcaModel, SrpModel};
use driftbench::rng;
use driftbench::shift::{self, ShiftContext, ShiftKind, ShiftSpec};
use driftbench::stats::{average_ranks, bonferroni, chi2_homogeneity, friedman_test, ks_two_sample};
use driftbench::tabular::{make_synthetic, preprocess, read_csv, split, Cell, Dataset, Encoder, SplitSpec, SyntheticSpec};

fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
    let mut r = rng::from_seed(seed);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal) + shift).collect()
}

fn blobs(n: usize, seed: u64) -> Dataset {
    make_synthetic(&SyntheticSpec::isotropic(n, vec![vec![0.0, 0.0, 0.0], vec![1.5, 1.0, 0.0]], seed)).unwrap()
}

/// Small mixed table with a categorical column and missing cells.
fn mixed(n: usize, seed: u64) -> Dataset {
    let mut r = rng::from_seed(seed);
    let colors = ["red", "green", "blue"];
    let mut text = String::from("a,b,color,y\n");
    for i in 0..n {
        let y = usize::from(r.random::<f64>() < 0.4);
        let a: f64 = r.sample::<f64, _>(StandardNormal) + y as f64;
        let b = if i % 11 == 3 { "NA".to_string() } else { format!("{:.4}", r.random::<f64>() * 3.0) };
        let c = if i % 13 == 5 { "" } else { colors[(i + y) % 3] };
        text.push_str(&format!("{a:.5},{b},{c},{y}\n"));
    }
    read_csv(text.as_bytes(), Some("y")).unwrap()
}

fn small_config(seed: u64) -> ContextConfig {
    let forest = ForestConfig { n_trees: 15, ..ForestConfig::default() };
    ContextConfig { forest, dc_forest: forest, ..ContextConfig::default() }.with_seed(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_p_in_unit_interval_and_symmetric(seed in any::<u64>(), n in 1usize..60, m in 1usize..60, shift in -2.0f64..2.0) {
        let x = normals(seed, n, 0.0);
        let y = normals(seed ^ 1, m, shift);
        let a = ks_two_sample(&x, &y).unwrap();
        let b = ks_two_sample(&y, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn ks_invariant_under_monotone_maps(seed in any::<u64>(), n in 2usize..50, m in 2usize..50) {
        let x = normals(seed, n, 0.0);
        let y = normals(seed ^ 7, m, 0.4);
        let f = |v: &[f64]| v.iter().map(|&t| 3.0 * t.exp() + 1.0).collect::<Vec<_>>();
        let a = ks_two_sample(&x, &y).unwrap();
        let b = ks_two_sample(&f(&x), &f(&y)).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
    }

    #[test]
    fn bonferroni_matches_per_test_rule(ps in prop::collection::vec(0.0f64..=1.0, 1..12), alpha in 0.001f64..0.2) {
        let agg = bonferroni(&ps).unwrap();
        let k = ps.len() as f64;
        let any_component = ps.iter().any(|&p| p < alpha / k);
        prop_assert_eq!(agg.aggregated_p < alpha, any_component);
        prop_assert!((0.0..=1.0).contains(&agg.aggregated_p));
    }

    #[test]
    fn friedman_invariant_under_monotone_score_maps(seed in any::<u64>(), n in 2usize..12, k in 2usize..6) {
        let mut r = rng::from_seed(seed);
        let scores = Array2::from_shape_fn((n, k), |_| f64::from(r.random_range(0..5u8)));
        let mapped = scores.mapv(|v| (v * 0.5).exp() - 2.0);
        let (ra, _) = average_ranks(&scores, true).unwrap();
        let (rb, _) = average_ranks(&mapped, true).unwrap();
        prop_assert_eq!(&ra, &rb);
        let p = friedman_test(&ra).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn chi2_symmetric_under_swap(a in prop::collection::vec(0usize..40, 2..6), seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let b: Vec<usize> = a.iter().map(|_| r.random_range(0..40)).collect();
        prop_assume!(a.iter().sum::<usize>() > 0 && b.iter().sum::<usize>() > 0);
        let x = chi2_homogeneity::<f64>(&a, &b).unwrap();
        let y = chi2_homogeneity::<f64>(&b, &a).unwrap();
        prop_assert!((x.statistic - y.statistic).abs() < 1e-9);
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_probabilities_sum_to_one_with_duplicates(seed in any::<u64>(), n in 5usize..60) {
        let mut r = rng::from_seed(seed);
        let base = Array2::from_shape_fn((n, 3), |_| f64::from(r.random_range(0..3u8)));
        let x = concatenate(Axis(0), &[base.view(), base.view()]).unwrap();
        let y: Vec<usize> = (0..2 * n).map(|_| r.random_range(0..3)).collect();
        let cfg = ForestConfig { n_trees: 8, seed, ..ForestConfig::default() };
        let f = RandomForest::fit(x.view(), &y, 3, &cfg).unwrap();
        for row in f.predict_proba(x.view()).unwrap().rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn unrestricted_forest_fits_distinct_rows_exactly(seed in any::<u64>(), n in 5usize..80) {
        let x = Array2::from_shape_vec((n, 2), normals(seed, 2 * n, 0.0)).unwrap();
        let mut r = rng::from_seed(seed ^ 3);
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let cfg = ForestConfig { n_trees: 5, bootstrap: false, features_per_split: FeatureSubset::All, max_depth: None, seed, ..ForestConfig::default() };
        let f = RandomForest::fit(x.view(), &y, 2, &cfg).unwrap();
        prop_assert_eq!(f.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn projections_are_row_wise(seed in any::<u64>(), n in 4usize..40, split_at in 1usize..4) {
        let x = Array2::from_shape_vec((n, 5), normals(seed, 5 * n, 0.0)).unwrap();
        let pca = PcaModel::fit(x.view(), 0.8).unwrap();
        let srp = SrpModel::<f64>::fit(5, 3, 0.5, seed).unwrap();
        let (a, b) = x.view().split_at(Axis(0), split_at);
        let rejoin = |f: &dyn Fn(ndarray::ArrayView2<'_, f64>) -> Array2<f64>| {
            let parts = concatenate(Axis(0), &[f(a).view(), f(b).view()]).unwrap();
            (&f(x.view()) - &parts).mapv(f64::abs).sum()
        };
        prop_assert!(rejoin(&|v| pca.transform(v).unwrap()) < 1e-9);
        prop_assert!(rejoin(&|v| srp.transform(v).unwrap()) < 1e-9);
        let srp_dense = x.dot(&srp.matrix().t());
        prop_assert!((&srp_dense - &srp.transform(x.view()).unwrap()).mapv(f64::abs).sum() < 1e-9);
    }

    #[test]
    fn pca_keeps_minimal_prefix(seed in any::<u64>(), n in 6usize..50, retention in 0.05f64..1.0) {
        let mut x = Array2::from_shape_vec((n, 4), normals(seed, 4 * n, 0.0)).unwrap();
        x.column_mut(1).mapv_inplace(|v| v * 3.0);
        let pca = PcaModel::fit(x.view(), retention).unwrap();
        let ratios = pca.explained_variance_ratio();
        let total: f64 = ratios.iter().sum();
        prop_assert!(total <= 1.0 + 1e-9);
        prop_assert!(total >= retention - 1e-9);
        let shorter: f64 = ratios[..ratios.len() - 1].iter().sum();
        prop_assert!(shorter < retention);
    }

    #[test]
    fn encoding_width_is_split_invariant(seed in any::<u64>(), n in 40usize..120) {
        let ds = mixed(n, seed);
        let spec = SplitSpec { train_size: n / 3, source_size: n / 3, target_size: n / 4, seed };
        let (train, source, target) = split(&ds, &spec).unwrap();
        let (enc, encoder) = preprocess::<f64>(&train, &[&source, &target]).unwrap();
        let full = Encoder::fit(&ds).unwrap();
        prop_assert!(enc.iter().all(|e| e.width() == encoder.width()));
        prop_assert_eq!(encoder.width(), full.width());
        prop_assert!(enc.iter().all(|e| e.values.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn preprocessing_is_idempotent(seed in any::<u64>(), n in 20usize..80) {
        let ds = mixed(n, seed);
        let (once, _) = preprocess::<f64>(&ds, &[]).unwrap();
        let again_input = once[0].to_dataset();
        let (twice, _) = preprocess::<f64>(&again_input, &[]).unwrap();
        prop_assert_eq!(&once[0].values, &twice[0].values);
    }
}

fn catalog_without_attacks() -> Vec<ShiftSpec> {
    let mut v: Vec<ShiftSpec> = shift::catalog().into_iter().filter(|s| !matches!(s.kind, ShiftKind::AdvZOO | ShiftKind::AdvBoundary)).collect();
    v.push(ShiftSpec::no_shift());
    v
}

fn cells_by_id(ds: &Dataset) -> std::collections::HashMap<u64, (Vec<Cell>, usize)> {
    let y = ds.labels().unwrap();
    ds.row_ids().iter().enumerate().map(|(i, &id)| (id, (ds.row(i).to_vec(), y[i]))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shifts_are_deterministic_pure_and_schema_preserving(seed in any::<u64>()) {
        let ds = mixed(120, seed);
        let before = ds.clone();
        let encoder = Encoder::fit(&ds).unwrap();
        let ctx = ShiftContext { encoder: Some(&encoder), ..ShiftContext::default() };
        let original = cells_by_id(&ds);
        for spec in catalog_without_attacks() {
            let spec = spec.with_seed(seed);
            let a = shift::apply(&ds, &spec, &ctx).unwrap();
            let b = shift::apply(&ds, &spec, &ctx).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&ds, &before);
            prop_assert!(a.target.compatible(&ds));
            let y = a.target.labels().unwrap();
            match spec.kind {
                ShiftKind::KnockOut | ShiftKind::OnlyOne | ShiftKind::JointSubsampling | ShiftKind::Subsampling | ShiftKind::UnderSampling | ShiftKind::NoShift => {
                    // Selection: every survivor is an untouched input row.
                    for (i, id) in a.target.row_ids().iter().enumerate() {
                        let (cells, label) = &original[id];
                        prop_assert_eq!(a.target.row(i), cells.as_slice());
                        prop_assert_eq!(y[i], *label);
                    }
                    if spec.kind == ShiftKind::UnderSampling {
                        prop_assert_eq!(a.target.n_rows(), (0.5f64 * 120.0).ceil() as usize);
                    }
                }
                ShiftKind::GaussianSmall | ShiftKind::GaussianMedium => {
                    prop_assert_eq!(a.target.n_rows(), ds.n_rows());
                    prop_assert_eq!(y, ds.labels().unwrap());
                    prop_assert_eq!(a.target.row_ids(), ds.row_ids());
                }
                ShiftKind::OverSampling => {
                    prop_assert_eq!(a.target.n_rows(), ds.n_rows());
                    let replaced = a.target.row_ids().iter().filter(|id| !original.contains_key(id)).count();
                    prop_assert_eq!(replaced, 60);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn over_sampled_rows_lie_in_class_hull(seed in any::<u64>()) {
        let ds = blobs(150, seed);
        let encoder = Encoder::fit(&ds).unwrap();
        let out = shift::over_sampling_interpolation(&ds, &encoder, 0.5, seed, 5).unwrap();
        let y0 = ds.labels().unwrap();
        let y1 = out.target.labels().unwrap();
        for (i, id) in out.target.row_ids().iter().enumerate() {
            if *id < ds.n_rows() as u64 {
                continue;
            }
            for j in 0..ds.n_cols() {
                let v = out.target.row(i)[j].as_num().unwrap();
                let same: Vec<f64> = (0..ds.n_rows()).filter(|&r| y0[r] == y1[i]).map(|r| ds.row(r)[j].as_num().unwrap()).collect();
                let (lo, hi) = same.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &s| (l.min(s), h.max(s)));
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}

#[test]
fn boundary_attack_flips_successes_and_leaves_failures() {
    let ds = blobs(300, 5);
    let (train, source, _) = split(&ds, &SplitSpec { train_size: 150, source_size: 150, target_size: 0, seed: 1 }).unwrap();
    let ctx = DetectorContext::<f64>::fit(&train, &small_config(2)).unwrap();
    let model = ctx.model().unwrap().clone();
    let encoder = Encoder::fit(&train).unwrap();
    let pool = encoder.encode::<f64>(&train).unwrap().values;
    let shift_ctx = ShiftContext { encoder: Some(&encoder), model: Some(model.as_ref()), pool: Some(&pool) };
    let out = shift::apply(&source, &ShiftSpec::new(ShiftKind::AdvBoundary, Some(0.5), None).with_seed(3), &shift_ctx).unwrap();
    let before = model.predict(encoder.encode::<f64>(&source).unwrap().values.view()).unwrap();
    let after = model.predict(encoder.encode::<f64>(&out.target).unwrap().values.view()).unwrap();
    assert_eq!(out.target.n_rows(), source.n_rows());
    let mut flipped = 0;
    for i in 0..source.n_rows() {
        if source.row(i) == out.target.row(i) {
            continue;
        }
        assert!(out.affected_rows.contains(&source.row_ids()[i]));
        assert_ne!(before[i], after[i], "modified row {i} keeps its prediction");
        flipped += 1;
    }
    assert_eq!(flipped + out.attack_failures, out.affected_rows.len());
    assert!(flipped > 0);
}

fn prepared(seed: u64, n: usize, noise: f64) -> (DetectorContext<f64>, PreparedSample<f64>, PreparedSample<f64>) {
    let ds = blobs(3 * n, seed);
    let (train, source, target) = split(&ds, &SplitSpec { train_size: n, source_size: n, target_size: n, seed }).unwrap();
    let ctx = DetectorContext::fit(&train, &small_config(seed)).unwrap();
    let target = if noise > 0.0 {
        shift::gaussian_noise(&target, 1.0, 1.0, shift::NoiseLevel::Custom(noise), seed).unwrap().target
    } else {
        target
    };
    let s = ctx.prepare(&source).unwrap();
    let t = ctx.prepare(&target).unwrap();
    (ctx, s, t)
}

#[test]
fn detection_is_deterministic_and_dc_ignores_row_order() {
    let (ctx, s, t) = prepared(4, 200, 0.5);
    for spec in DetectorSpec::all().into_iter().filter(|d| !d.adaptive) {
        let a = detect(&ctx, &s, &t, &spec, 9).unwrap();
        let b = detect(&ctx, &s, &t, &spec, 9).unwrap();
        assert_eq!(a, b, "{spec}");
        assert!((0.0..=1.0).contains(&a.p_value));
    }
    let mut order: Vec<usize> = (0..s.n_rows()).rev().collect();
    order.rotate_left(17);
    let (s2, t2) = (s.select(&order), t.select(&order));
    for name in [DetectorName::DC, DetectorName::DCstar] {
        let spec = DetectorSpec::fixed(name);
        assert_eq!(detect(&ctx, &s, &t, &spec, 9).unwrap().p_value, detect(&ctx, &s2, &t2, &spec, 9).unwrap().p_value);
    }
}

#[test]
fn adaptive_level_is_at_least_bonferroni() {
    let ds = blobs(1200, 8);
    let (train, source, _) = split(&ds, &SplitSpec { train_size: 400, source_size: 800, target_size: 0, seed: 2 }).unwrap();
    let ctx = DetectorContext::<f64>::fit(&train, &small_config(3)).unwrap();
    let pool = ctx.prepare(&source).unwrap();
    let cal = calibrate(&ctx, &pool, &[DetectorName::TestX], 200, 60, 0.05, 4).unwrap();
    // Three features: the fixed rule tests each at 0.05 / 3.
    assert!(cal[0].level >= 0.05 / 3.0, "level {}", cal[0].level);
}

#[test]
fn feature_p_values_fall_as_noise_grows() {
    let spec = DetectorSpec::fixed(DetectorName::TestX);
    let means: Vec<f64> = [0.0, 0.5, 1.0, 3.0]
        .iter()
        .map(|&sigma| {
            (0..12u64)
                .map(|seed| {
                    let (ctx, s, t) = prepared(seed, 300, sigma);
                    detect(&ctx, &s, &t, &spec, seed).unwrap().p_value
                })
                .sum::<f64>()
                / 12.0
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0] + 0.1, "mean p-values {means:?}");
    }
    assert!(means[3] < 0.01);
}

#[test]
fn perturbation_shrinks_the_confusion_eigenvalue() {
    let ds = blobs(1500, 12);
    let (train, eval, _) = split(&ds, &SplitSpec { train_size: 500, source_size: 1000, target_size: 0, seed: 3 }).unwrap();
    let ctx = DetectorContext::<f64>::fit(&train, &small_config(5)).unwrap();
    let base = ctx.model().unwrap().clone();
    let x = ctx.encode(&eval).unwrap().values;
    let y = eval.labels().unwrap();
    let lam = |m: &dyn Classifier<f64>| min_eigenpair(&m.confusion_matrix(x.view(), y).unwrap().c).unwrap().0.abs();
    let bad = perturb(Arc::clone(&base), 0.6, 1).unwrap();
    assert!(lam(&bad) < lam(base.as_ref()), "{} vs {}", lam(&bad), lam(base.as_ref()));
}

#[test]
fn context_bundle_round_trips() {
    let ds = mixed(200, 6);
    let ctx = DetectorContext::<f64>::fit(&ds, &small_config(7)).unwrap();
    let back = DetectorContext::<f64>::from_json(&ctx.to_json()).unwrap();
    let a = ctx.prepare(&ds).unwrap();
    let b = back.prepare(&ds).unwrap();
    assert_eq!(back.label.as_deref(), Some("y"));
    assert_eq!(a.proba, b.proba);
    assert_eq!(a.pca, b.pca);
    assert_eq!(a.srp, b.srp);
}

fn tiny_plan() -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(vec![
        benchmark::DatasetSource::synthetic("a", SyntheticSpec::isotropic(700, vec![vec![0.0, 0.0], vec![1.5, 0.5]], 1)),
        benchmark::DatasetSource::synthetic("b", SyntheticSpec::isotropic(700, vec![vec![0.0, 0.0], vec![0.5, 1.5]], 2)),
    ]);
    plan.shifts = vec![
        ShiftSpec::new(ShiftKind::KnockOut, Some(0.5), None),
        ShiftSpec::new(ShiftKind::GaussianMedium, Some(1.0), Some(1.0)),
        ShiftSpec::no_shift(),
    ];
    plan.sizes = vec![10, 50, 200];
    plan.seeds = vec![0, 1];
    plan.detectors = ["BBSDs", "Test_X", "BBSDs+X (adapt)"].iter().map(|d| d.parse().unwrap()).collect();
    plan.split = SplitSpec { train_size: 200, source_size: 250, target_size: 100, seed: 0 };
    plan.calibration_runs = 10;
    plan.context = small_config(0);
    plan
}

#[test]
fn summary_tables_reconcile_with_cells() {
    let plan = tiny_plan();
    let report = benchmark::run(&plan, 2).unwrap();
    assert!(report.calibration_errors.is_empty(), "{:?}", report.calibration_errors);
    assert_eq!(report.summary.failed_cells, 0);
    let recomputed = benchmark::aggregate(&report.cells, &plan.sizes);
    assert_eq!(recomputed, report.summary);
    for acc in &report.summary.accuracy {
        let shifted = plan.shifts.iter().filter(|s| s.kind != ShiftKind::NoShift).count();
        let datasets = plan.datasets.len();
        assert_eq!(acc.positives, shifted * datasets);
        assert_eq!(acc.negatives, datasets);
        assert!(acc.correct <= acc.positives + acc.negatives);
        assert!((acc.accuracy - acc.correct as f64 / (acc.positives + acc.negatives) as f64).abs() < 1e-12);
    }
    for e in &report.summary.efficiency {
        let by_size = plan
            .sizes
            .iter()
            .map(|&size| {
                let t = report.summary.tpr.iter().find(|t| t.detector == e.detector && t.shift_type == e.shift_type && t.size == size);
                (size, t.is_some())
            })
            .collect::<std::collections::BTreeMap<_, _>>();
        assert!(by_size.values().all(|&found| found), "{e:?}");
        assert!(e.score as usize <= plan.sizes.len());
    }
    let flags: std::collections::BTreeMap<usize, bool> = [(10, false), (50, true), (200, true)].into_iter().collect();
    assert_eq!(efficiency_score(&flags, &plan.sizes).unwrap(), 2);
}

#[test]
fn plan_json_round_trips_and_rejects_bad_plans() {
    let plan = tiny_plan();
    let text = serde_json::to_string(&plan).unwrap();
    assert_eq!(ExperimentPlan::from_json(&text).unwrap(), plan);
    let mut bad = plan.clone();
    bad.sizes.clear();
    assert!(ExperimentPlan::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    let mut bad = plan.clone();
    bad.shifts.push(ShiftSpec::new(ShiftKind::KnockOut, Some(1.5), None));
    assert!(ExperimentPlan::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    assert!(ExperimentPlan::from_json(r#"{"datasets": []}"#).is_err());
}
