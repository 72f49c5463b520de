use super::DatasetSource;
use crate::tabular::SyntheticSpec;

/// Rows per synthetic dataset: the default split plus a 2000-row remainder
/// for calibration.
pub const SYNTHETIC_ROWS: usize = 7000;

fn shared(d: usize, rho: f64, scale: &[f64]) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let r = if i == j { 1.0 } else { rho.powi((i as i32 - j as i32).abs()) };
                    r * scale[i % scale.len()] * scale[j % scale.len()]
                })
                .collect()
        })
        .collect()
}

/// Balanced two-class Gaussian mixture with unit covariance.
pub fn balanced_binary(seed: u64) -> DatasetSource {
    let centers = vec![vec![0.0; 6], vec![0.8, 0.6, 0.4, 0.0, 0.0, 0.0]];
    DatasetSource::synthetic("balanced-binary", SyntheticSpec::isotropic(SYNTHETIC_ROWS, centers, seed))
}

/// Binary Gaussian-mixture datasets of varied geometry and class balance.
pub fn synthetic_suite(seed: u64) -> Vec<DatasetSource> {
    let mut v = vec![balanced_binary(seed)];
    v.push(DatasetSource::synthetic(
        "imbalanced-binary",
        SyntheticSpec::isotropic(SYNTHETIC_ROWS, vec![vec![0.0; 5], vec![1.0, 0.7, 0.0, 0.3, 0.0]], seed + 1)
            .with_weights(vec![0.7, 0.3]),
    ));
    v.push(DatasetSource::synthetic(
        "correlated-binary",
        SyntheticSpec {
            n: SYNTHETIC_ROWS,
            centers: vec![vec![0.0; 8], vec![0.6, 0.0, 0.6, 0.0, 0.6, 0.0, 0.0, 0.0]],
            covariances: vec![shared(8, 0.5, &[1.0, 2.0, 0.5])],
            weights: Some(vec![0.6, 0.4]),
            seed: seed + 2,
        },
    ));
    v.push(DatasetSource::synthetic(
        "heteroscedastic-binary",
        SyntheticSpec {
            n: SYNTHETIC_ROWS,
            centers: vec![vec![0.0; 4], vec![0.5, 0.5, 0.0, 0.0]],
            covariances: vec![shared(4, 0.0, &[1.0]), shared(4, 0.3, &[1.5, 0.7])],
            weights: None,
            seed: seed + 3,
        },
    ));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_loads() {
        for src in synthetic_suite(0) {
            let mut src = src;
            if let Some(s) = src.synthetic.as_mut() {
                s.n = 50;
            }
            let ds = src.load(None).unwrap();
            assert_eq!(ds.n_rows(), 50);
            assert_eq!(ds.class_count(), 2);
        }
    }
}
