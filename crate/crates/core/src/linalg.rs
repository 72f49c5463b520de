//! Small dense linear algebra: symmetric eigendecomposition by cyclic Jacobi
//! rotations, LU with partial pivoting, and the minimum-magnitude eigenpair by
//! inverse power iteration.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({0} x {1})")]
    NotSquare(usize, usize),
    #[error("matrix is singular (|det| = {0:e})")]
    SingularMatrix(f64),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_SWEEPS: usize = 100;
const POWER_TOL: f64 = 1e-10;
const POWER_ITERS: usize = 10_000;
const RESIDUAL_TOL: f64 = 1e-8;
const DET_TOL: f64 = 1e-12;

fn check_square<T: Real>(a: &Array2<T>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(LinalgError::NotSquare(r, c));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(r)
}

/// Precision floor so `f32` instantiations use attainable tolerances.
fn tol<T: Real>(base: f64, scale: T) -> T {
    T::of(base).max(T::epsilon() * T::of(64.0)) * scale.max(T::one())
}

/// Eigenvalues (descending) and eigenvectors (matching columns) of a symmetric matrix.
pub fn symmetric_eigen<T: Real>(a: &Array2<T>) -> Result<(Vec<T>, Array2<T>)> {
    let n = check_square(a)?;
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let scale = m.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let limit = tol(JACOBI_TOL, scale);
    let off = |m: &Array2<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[[i, j]] * m[[i, j]];
                }
            }
        }
        s.sqrt()
    };
    let mut converged = off(&m) < limit;
    let two = T::of(2.0);
    for _ in 0..JACOBI_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) < limit;
    }
    if !converged {
        return Err(LinalgError::NoConvergence(format!("Jacobi off-diagonal norm {} after {JACOBI_SWEEPS} sweeps", off(&m))));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].as_f64().total_cmp(&m[[i, i]].as_f64()).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok((values, vectors))
}

/// LU factorization with partial pivoting, `P A = L U` stored compactly.
#[derive(Clone, Debug)]
pub struct Lu<T: Real> {
    lu: Array2<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Array2<T>) -> Result<Self> {
        let n = check_square(a)?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if lu[[i, k]].abs() > lu[[piv, k]].abs() {
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    lu.swap([k, j], [piv, j]);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = lu[[k, k]];
            if d == T::zero() {
                continue;
            }
            for i in k + 1..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                for j in k + 1..n {
                    let u = lu[[k, j]];
                    lu[[i, j]] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn determinant(&self) -> T {
        (0..self.lu.nrows()).fold(self.sign, |d, i| d * self.lu[[i, i]])
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &Array1<T>) -> Array1<T> {
        let n = self.lu.nrows();
        let mut x: Array1<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[[i, j]];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[[i, j]];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }
}

pub fn determinant<T: Real>(a: &Array2<T>) -> Result<T> {
    Ok(Lu::new(a)?.determinant())
}

fn norm<T: Real>(v: &Array1<T>) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

fn orient<T: Real>(v: &mut Array1<T>) {
    let floor = T::of(1e-12).max(T::epsilon() * T::of(16.0));
    if let Some(first) = v.iter().copied().find(|x| x.abs() > floor) {
        if first < T::zero() {
            v.mapv_inplace(|x| -x);
        }
    }
}

fn inverse_iteration<T: Real>(c: &Array2<T>, lu: &Lu<T>, start: Array1<T>) -> Option<(T, Array1<T>)> {
    let limit = tol(POWER_TOL, T::one());
    let mut v = &start / norm(&start);
    for _ in 0..POWER_ITERS {
        let w = lu.solve(&v);
        let w_norm = norm(&w);
        if !w_norm.is_finite() || w_norm == T::zero() {
            return None;
        }
        let mut next = w / w_norm;
        // A negative eigenvalue flips the iterate each step; compare up to sign.
        if next.dot(&v) < T::zero() {
            next.mapv_inplace(|x| -x);
        }
        let change = norm(&(&next - &v));
        v = next;
        if change < limit {
            let lambda = v.dot(&c.dot(&v));
            return Some((lambda, v));
        }
    }
    None
}

/// Eigenpair with the smallest `|λ|`, `v` unit length with its first nonzero
/// entry positive. Two deterministic starts are tried (`e₁` and a ramp); the
/// smaller `|λ|` wins and exact ties keep the `e₁` result.
pub fn min_eigenpair<T: Real>(c: &Array2<T>) -> Result<(T, Array1<T>)> {
    let n = check_square(c)?;
    if n == 0 {
        return Err(LinalgError::SingularMatrix(0.0));
    }
    let lu = Lu::new(c)?;
    let det = lu.determinant();
    if !(det.abs() > T::of(DET_TOL)) {
        return Err(LinalgError::SingularMatrix(det.as_f64()));
    }
    let mut e1 = Array1::<T>::zeros(n);
    e1[0] = T::one();
    let ramp: Array1<T> = (0..n).map(|i| T::of_usize(i + 1) * if i % 2 == 0 { T::one() } else { -T::one() }).collect();
    let residual_limit = tol(RESIDUAL_TOL, T::one()).max(T::epsilon().sqrt() * T::of(4.0));
    let accept = |pair: Option<(T, Array1<T>)>| {
        pair.filter(|(l, v)| norm(&(c.dot(v) - v * *l)) < residual_limit)
    };
    let best = match (accept(inverse_iteration(c, &lu, e1)), accept(inverse_iteration(c, &lu, ramp))) {
        (Some(a), Some(b)) => {
            if b.0.abs() < a.0.abs() - tol(1e-12, T::one()) { b } else { a }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(LinalgError::NoConvergence(
                "inverse iteration found no real eigenpair (complex smallest eigenvalue suspected)".into(),
            ))
        }
    };
    let (lambda, mut v) = best;
    orient(&mut v);
    Ok((lambda, v))
}
