//! Dense symmetric linear algebra used by the solvers.
//!
//! Everything here is written for the problem sizes this crate targets
//! (n up to a few hundred): plain `O(n^3)` Cholesky factorizations, and a
//! bisection-plus-inverse-iteration smallest-eigenpair routine that only
//! relies on Cholesky success as its definiteness test.

use ndarray::{Array1, Array2};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` if a pivot is non-positive or non-finite.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_solve(l: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// Solves `L L^T x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    backward_solve(l, &forward_solve(l, b))
}

/// Max-norm of the matrix, `max_ij |a_ij|`.
pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Largest absolute asymmetry `max_ij |a_ij - a_ji|`.
pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

fn add_shifted_identity(a: &Array2<f64>, shift: f64) -> Array2<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[[i, i]] += shift;
    }
    out
}

/// Smallest eigenvalue and a unit eigenvector of a symmetric matrix.
///
/// The eigenvalue is located by bisection on the success of the Cholesky
/// factorization of `A - t I` between Gershgorin bounds, then the eigenvector
/// is recovered by shifted inverse iteration. `tol` is an absolute tolerance
/// on the eigenvalue, relative to `max(1, |A|_max)`.
pub fn smallest_eigenpair(a: &Array2<f64>, tol: f64) -> (f64, Array1<f64>) {
    let n = a.nrows();
    let scale = max_abs(a).max(1.0);
    let abs_tol = tol * scale;

    // Gershgorin lower bound; min diagonal entry bounds lambda_min above.
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        for j in 0..n {
            if j != i {
                radius += a[[i, j]].abs();
            }
        }
        lo = lo.min(a[[i, i]] - radius);
        hi = hi.min(a[[i, i]]);
    }
    let mut lo = lo - abs_tol.max(1e-300);
    let mut hi = hi + abs_tol.max(1e-300);

    // Invariant: A - lo*I is PD, A - hi*I is not.
    while hi - lo > abs_tol.max(f64::EPSILON * scale) {
        let mid = 0.5 * (lo + hi);
        if cholesky(&add_shifted_identity(a, -mid)).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    // Shift strictly below lambda_min so the factorization exists but is
    // nearly singular; inverse iteration then converges in a few sweeps.
    let gap = (hi - lo).max(abs_tol).max(1e-14 * scale);
    let shifted = add_shifted_identity(a, -(lo - gap));
    let l = match cholesky(&shifted) {
        Some(l) => l,
        None => {
            // Retreat further if rounding spoiled definiteness.
            let l = cholesky(&add_shifted_identity(a, -(lo - 10.0 * gap - abs_tol)));
            l.expect("shifted matrix must be positive definite below lambda_min")
        }
    };
    let mut v = Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    v[0] += 0.3; // break symmetry for vectors orthogonal to the all-ones start
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    for _ in 0..64 {
        let w = cholesky_solve(&l, &v);
        let norm = w.dot(&w).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        let w = w.mapv(|x| x / norm);
        let delta = (&w - &v)
            .mapv(f64::abs)
            .sum()
            .min((&w + &v).mapv(f64::abs).sum());
        v = w;
        if delta < 1e-15 * (n as f64) {
            break;
        }
    }
    let rayleigh = v.dot(&a.dot(&v));
    // The Rayleigh quotient is more accurate than the bisection midpoint once
    // the vector has converged; keep whichever is consistent with the bracket.
    let lambda = if (rayleigh - lambda).abs() <= gap * 4.0 + abs_tol * 4.0 {
        rayleigh
    } else {
        lambda
    };
    (lambda, v)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration with a deterministic start. Used for Lipschitz-type bounds.
pub fn largest_eigenvalue_psd(a: &Array2<f64>, iters: usize) -> f64 {
    let n = a.nrows();
    let mut v = Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    v[0] += 0.1;
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        v = w.mapv(|x| x / norm);
        lambda = v.dot(&a.dot(&v));
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_recovers_spd_factor() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let reconstructed = l.dot(&l.t());
        for (x, y) in a.iter().zip(reconstructed.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn solve_roundtrip() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let l = cholesky(&a).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        let r = &a.dot(&x) - &b;
        assert!(r.dot(&r).sqrt() < 1e-12);
    }

    #[test]
    fn smallest_eigenpair_diagonal() {
        let a = array![[3.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 5.0]];
        let (lambda, v) = smallest_eigenpair(&a, 1e-12);
        assert!((lambda + 2.0).abs() < 1e-9);
        assert!(v[1].abs() > 0.999);
        assert!(v[0].abs() < 1e-6 && v[2].abs() < 1e-6);
    }

    #[test]
    fn smallest_eigenpair_rotated() {
        // Eigenvalues 1 and 6 rotated by 30 degrees.
        let c = 3.0_f64.sqrt() / 2.0;
        let s = 0.5;
        let q = array![[c, -s], [s, c]];
        let d = array![[1.0, 0.0], [0.0, 6.0]];
        let a = q.dot(&d).dot(&q.t());
        let (lambda, v) = smallest_eigenpair(&a, 1e-12);
        assert!((lambda - 1.0).abs() < 1e-9);
        let residual = &a.dot(&v) - &v.mapv(|x| x * lambda);
        assert!(residual.dot(&residual).sqrt() < 1e-7);
    }

    #[test]
    fn largest_eigenvalue_psd_simple() {
        let a = array![[2.0, 0.0], [0.0, 7.0]];
        let lambda = largest_eigenvalue_psd(&a, 200);
        assert!((lambda - 7.0).abs() < 1e-9);
    }
}
