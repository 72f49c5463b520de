use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{choose_rows, column_sigma, floor_frac, Result, ShiftError, ShiftKind, ShiftOutcome, ShiftSpec};
use crate::forest::{argmax, Classifier};
use crate::rng;
use crate::tabular::{Cell, Dataset, Encoder};

#[derive(Clone, Debug, PartialEq)]
pub struct ZooBudget {
    pub max_iters: usize,
    /// Step size in units of σ_j.
    pub step: f64,
    /// Radius of the σ-normalized L2 ball.
    pub max_l2: f64,
}

impl ZooBudget {
    pub fn for_width(d: usize) -> Self {
        Self { max_iters: 200 * d.max(1), step: 0.05, max_l2: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryBudget {
    /// Model queries per row after initialization.
    pub max_steps: usize,
    pub init_tries: usize,
}

impl Default for BoundaryBudget {
    fn default() -> Self {
        Self { max_steps: 500, init_tries: 50 }
    }
}

/// An attackable coordinate: encoded index and its raw-column σ.
#[derive(Clone, Copy)]
struct Coord {
    raw: usize,
    enc: usize,
    sigma: f64,
}

struct Setup {
    x: Array2<f64>,
    coords: Vec<Coord>,
    rows: Vec<usize>,
}

fn setup(ds: &Dataset, encoder: &Encoder, model: &dyn Classifier<f64>, s: f64, seed: u64) -> Result<Setup> {
    let numeric = encoder.numeric_coordinates();
    if numeric.is_empty() {
        return Err(ShiftError::NoNumericFeatures);
    }
    let x = encoder.encode::<f64>(ds)?.values;
    if model.n_features() != x.ncols() {
        return Err(ShiftError::Forest(crate::forest::ForestError::DimensionMismatch {
            expected: model.n_features(),
            found: x.ncols(),
        }));
    }
    let coords = numeric
        .into_iter()
        .map(|(raw, enc)| Coord { raw, enc, sigma: column_sigma(ds, raw) })
        .filter(|c| c.sigma > 0.0)
        .collect();
    let rows = choose_rows(ds.n_rows(), floor_frac(s, ds.n_rows()), &mut rng::stream(seed, &[rng::tag("rows")]));
    Ok(Setup { x, coords, rows })
}

struct Oracle<'a> {
    model: &'a dyn Classifier<f64>,
    index: usize,
    buf: Vec<f64>,
}

impl Oracle<'_> {
    fn proba(&mut self, x: &[f64]) -> &[f64] {
        self.model.predict_proba_row(x, self.index, &mut self.buf);
        &self.buf
    }

    fn predict(&mut self, x: &[f64]) -> usize {
        argmax(self.proba(x))
    }

    fn margin(&mut self, x: &[f64], y0: usize) -> f64 {
        let p = self.proba(x);
        let other = p.iter().enumerate().filter(|&(c, _)| c != y0).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
        p[y0] - other
    }
}

fn finish(
    ds: &Dataset,
    setup: &Setup,
    results: Vec<Option<Vec<f64>>>,
    spec: ShiftSpec,
) -> Result<ShiftOutcome> {
    let mut cells = ds.rows().to_vec();
    let mut failures = 0;
    for (&i, res) in setup.rows.iter().zip(results) {
        match res {
            Some(x) => {
                for c in &setup.coords {
                    if let Cell::Num(_) = cells[i][c.raw] {
                        cells[i][c.raw] = Cell::Num(x[c.enc]);
                    }
                }
            }
            None => failures += 1,
        }
    }
    Ok(ShiftOutcome {
        target: ds.with_rows(cells, ds.labels().map(<[usize]>::to_vec), ds.row_ids().to_vec())?,
        applied: spec,
        affected_rows: setup.rows.iter().map(|&i| ds.row_ids()[i]).collect(),
        attack_failures: failures,
    })
}

/// Coordinates of row `i` the attack may move: numeric, observed, non-constant.
fn row_coords(ds: &Dataset, setup: &Setup, i: usize) -> Vec<Coord> {
    setup.coords.iter().copied().filter(|c| !ds.row(i)[c.raw].is_missing()).collect()
}

fn norm(x: &[f64], x0: &[f64], coords: &[Coord]) -> f64 {
    coords.iter().map(|c| ((x[c.enc] - x0[c.enc]) / c.sigma).powi(2)).sum::<f64>().sqrt()
}

/// Zeroth-order sign descent on the probability margin of `⌊s·n⌋` rows.
pub fn adversarial_zoo(
    ds: &Dataset,
    encoder: &Encoder,
    model: &dyn Classifier<f64>,
    s: f64,
    seed: u64,
    budget: &ZooBudget,
) -> Result<ShiftOutcome> {
    let setup = setup(ds, encoder, model, s, seed)?;
    let k = model.n_classes();
    let results: Vec<Option<Vec<f64>>> = setup
        .rows
        .par_iter()
        .map(|&i| {
            let coords = row_coords(ds, &setup, i);
            if coords.is_empty() {
                return None;
            }
            let mut oracle = Oracle { model, index: i, buf: vec![0.0; k] };
            let mut r = rng::stream(seed, &[rng::tag("zoo"), ds.row_ids()[i]]);
            let x0 = setup.x.row(i).to_vec();
            let y0 = oracle.predict(&x0);
            let mut x = x0.clone();
            for _ in 0..budget.max_iters {
                let c = coords[r.random_range(0..coords.len())];
                let h = 0.01 * c.sigma;
                let base = x[c.enc];
                x[c.enc] = base + h;
                let up = oracle.margin(&x, y0);
                x[c.enc] = base - h;
                let down = oracle.margin(&x, y0);
                x[c.enc] = base;
                let g = (up - down) / (2.0 * h);
                if g == 0.0 {
                    continue;
                }
                x[c.enc] = base - budget.step * c.sigma * g.signum();
                let len = norm(&x, &x0, &coords);
                if len > budget.max_l2 {
                    let shrink = budget.max_l2 / len;
                    for c in &coords {
                        x[c.enc] = x0[c.enc] + (x[c.enc] - x0[c.enc]) * shrink;
                    }
                }
                if oracle.predict(&x) != y0 {
                    return Some(x);
                }
            }
            None
        })
        .collect();
    finish(ds, &setup, results, ShiftSpec::new(ShiftKind::AdvZOO, Some(s), None).with_seed(seed))
}

/// Decision-based boundary attack on `⌊s·n⌋` rows. Starting points come
/// from `pool` (encoded rows), or from `ds` itself when absent.
pub fn adversarial_boundary(
    ds: &Dataset,
    encoder: &Encoder,
    model: &dyn Classifier<f64>,
    pool: Option<&Array2<f64>>,
    s: f64,
    seed: u64,
    budget: &BoundaryBudget,
) -> Result<ShiftOutcome> {
    let setup = setup(ds, encoder, model, s, seed)?;
    let pool = pool.unwrap_or(&setup.x);
    if pool.ncols() != setup.x.ncols() {
        return Err(ShiftError::Forest(crate::forest::ForestError::DimensionMismatch {
            expected: setup.x.ncols(),
            found: pool.ncols(),
        }));
    }
    let k = model.n_classes();
    let results: Vec<Option<Vec<f64>>> = setup
        .rows
        .par_iter()
        .map(|&i| {
            let coords = row_coords(ds, &setup, i);
            if coords.is_empty() || pool.nrows() == 0 {
                return None;
            }
            let mut oracle = Oracle { model, index: i, buf: vec![0.0; k] };
            let mut r = rng::stream(seed, &[rng::tag("boundary"), ds.row_ids()[i]]);
            let x0 = setup.x.row(i).to_vec();
            let y0 = oracle.predict(&x0);
            let mismatch = |o: &mut Oracle<'_>, x: &[f64]| o.predict(x) != y0;

            let mut adv = None;
            for _ in 0..budget.init_tries {
                let p = pool.row(r.random_range(0..pool.nrows()));
                let mut cand = x0.clone();
                for c in &coords {
                    cand[c.enc] = p[c.enc];
                }
                if mismatch(&mut oracle, &cand) {
                    adv = Some(cand);
                    break;
                }
            }
            let mut adv = adv?;
            let along = |t: f64, to: &[f64]| {
                let mut p = x0.clone();
                for c in &coords {
                    p[c.enc] = x0[c.enc] + t * (to[c.enc] - x0[c.enc]);
                }
                p
            };
            let mut steps = 0;
            let mut spread = 0.05;
            while steps < budget.max_steps {
                // Bisection toward the original row keeping the adversarial end.
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..4 {
                    if steps >= budget.max_steps {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    steps += 1;
                    if mismatch(&mut oracle, &along(mid, &adv)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if hi < 1.0 {
                    adv = along(hi, &adv);
                }
                if steps >= budget.max_steps {
                    break;
                }
                // Orthogonal step on the sphere around x0.
                let dist = norm(&adv, &x0, &coords);
                if dist == 0.0 {
                    break;
                }
                let dir: Vec<f64> = coords.iter().map(|c| (adv[c.enc] - x0[c.enc]) / c.sigma / dist).collect();
                let mut eta: Vec<f64> = coords.iter().map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let proj: f64 = eta.iter().zip(&dir).map(|(a, b)| a * b).sum();
                eta.iter_mut().zip(&dir).for_each(|(e, d)| *e -= proj * d);
                let en = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
                if en == 0.0 {
                    continue;
                }
                let mut moved: Vec<f64> =
                    dir.iter().zip(&eta).map(|(d, e)| d * dist + e / en * spread * dist).collect();
                let mn = moved.iter().map(|m| m * m).sum::<f64>().sqrt();
                moved.iter_mut().for_each(|m| *m *= dist / mn);
                let mut cand = x0.clone();
                for (c, m) in coords.iter().zip(&moved) {
                    cand[c.enc] = x0[c.enc] + m * c.sigma;
                }
                steps += 1;
                if mismatch(&mut oracle, &cand) && norm(&cand, &x0, &coords) <= dist {
                    adv = cand;
                    spread = (spread * 1.2).min(1.0);
                } else {
                    spread *= 0.8;
                }
            }
            Some(adv)
        })
        .collect();
    finish(ds, &setup, results, ShiftSpec::new(ShiftKind::AdvBoundary, Some(s), None).with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Predicts class 1 iff coordinate 0 exceeds `t`; probabilities ramp linearly.
    struct Stump {
        t: f64,
        d: usize,
    }

    impl Classifier<f64> for Stump {
        fn n_classes(&self) -> usize {
            2
        }
        fn n_features(&self) -> usize {
            self.d
        }
        fn predict_proba_row(&self, row: &[f64], _index: usize, out: &mut [f64]) {
            let p1 = (0.5 + (row[0] - self.t)).clamp(0.0, 1.0);
            let p1 = if row[0] > self.t { p1.max(0.5 + 1e-9) } else { p1.min(0.5) };
            out[0] = 1.0 - p1;
            out[1] = p1;
        }
    }

    struct Constant;

    impl Classifier<f64> for Constant {
        fn n_classes(&self) -> usize {
            2
        }
        fn n_features(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, _row: &[f64], _index: usize, out: &mut [f64]) {
            out[0] = 1.0;
            out[1] = 0.0;
        }
    }

    fn line(n: usize) -> Dataset {
        let values: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 * 2.0, (i % 3) as f64]).collect();
        Dataset::from_numeric(&["a".to_string(), "b".to_string()], &values, Some(vec![0; n])).unwrap()
    }

    #[test]
    fn constant_model_defeats_attacks() {
        let ds = line(40);
        let enc = Encoder::fit(&ds).unwrap();
        let zoo = adversarial_zoo(&ds, &enc, &Constant, 1.0, 1, &ZooBudget::for_width(2)).unwrap();
        assert_eq!(zoo.attack_failures, 40);
        assert_eq!(zoo.target, ds);
        let bnd = adversarial_boundary(&ds, &enc, &Constant, None, 1.0, 1, &BoundaryBudget::default()).unwrap();
        assert_eq!(bnd.attack_failures, 40);
        assert_eq!(bnd.target, ds);
    }

    #[test]
    fn zoo_crosses_stump() {
        let ds = line(40);
        let enc = Encoder::fit(&ds).unwrap();
        let stump = Stump { t: 1.0, d: 2 };
        let out = adversarial_zoo(&ds, &enc, &stump, 1.0, 3, &ZooBudget::for_width(2)).unwrap();
        let x_src = enc.encode::<f64>(&ds).unwrap().values;
        let x_tgt = enc.encode::<f64>(&out.target).unwrap().values;
        let mut successes = 0;
        for i in 0..40 {
            if out.target.row(i) != ds.row(i) {
                successes += 1;
                assert_ne!(stump.predict(x_src.slice(ndarray::s![i..i + 1, ..])).unwrap(),
                    stump.predict(x_tgt.slice(ndarray::s![i..i + 1, ..])).unwrap());
            }
        }
        assert_eq!(successes + out.attack_failures, 40);
        assert!(successes > 20, "only {successes} successes");
    }

    #[test]
    fn boundary_flips_and_stays_close() {
        let ds = line(40);
        let enc = Encoder::fit(&ds).unwrap();
        let stump = Stump { t: 1.0, d: 2 };
        let out = adversarial_boundary(&ds, &enc, &stump, None, 1.0, 5, &BoundaryBudget::default()).unwrap();
        assert_eq!(out.attack_failures, 0);
        let x_src = enc.encode::<f64>(&ds).unwrap().values;
        let x_tgt = enc.encode::<f64>(&out.target).unwrap().values;
        let p_src = stump.predict(x_src.view()).unwrap();
        let p_tgt = stump.predict(x_tgt.view()).unwrap();
        for i in 0..40 {
            assert_ne!(p_src[i], p_tgt[i]);
            // Closest adversarial point hugs the threshold on coordinate 0.
            assert!((x_tgt[[i, 0]] - 1.0).abs() < 0.1, "row {i}: {}", x_tgt[[i, 0]]);
        }
    }

    #[test]
    fn no_model_is_an_error() {
        let ds = line(10);
        let spec = ShiftSpec::new(ShiftKind::AdvZOO, Some(0.5), None);
        assert!(matches!(super::super::apply(&ds, &spec, &Default::default()), Err(ShiftError::UnfittedModel)));
    }
}
