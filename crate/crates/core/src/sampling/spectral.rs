//! Spectral quantities of small dense matrices.
//!
//! `λ_min(AᵀA)` has two independent routes: a dense symmetric eigensolve
//! and the two-stage power-iteration trick (top eigenvalue of `AᵀA`, then
//! top eigenvalue of `λ_max I − AᵀA`). The solver uses the dense route; the
//! power route exists so the two can be checked against each other.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

const POWER_TOL: f64 = 1e-14;
const POWER_MAX_ITER: usize = 200_000;

pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * a
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `λ_min(AᵀA)` via dense symmetric eigensolve, clamped at zero.
pub fn min_eig_gram(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(&gram(a)).first().copied().unwrap_or(0.0).max(0.0)
}

/// `λ_max(AᵀA)` via dense symmetric eigensolve.
pub fn max_eig_gram(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(&gram(a)).last().copied().unwrap_or(0.0).max(0.0)
}

/// Induced 2-norm.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    max_eig_gram(a).sqrt()
}

/// Entrywise ℓ1 norm.
pub fn l1_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Number of singular values above `tol`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s > tol)
        .count()
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix.
pub fn power_iteration(s: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = s.nrows();
    // deterministic start with no special alignment
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i + 1) as f64).sin());
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = s * &v;
        lambda = v.dot(&w);
        let residual = (&w - &v * lambda).norm();
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        v = w / norm;
        if residual <= POWER_TOL * lambda.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (lambda, v)
}

/// `λ_min(AᵀA)` by the two-stage power-iteration route.
pub fn min_eig_gram_two_stage(a: &DMatrix<f64>) -> f64 {
    let g = gram(a);
    let (lambda_max, _) = power_iteration(&g);
    if lambda_max <= 0.0 {
        return 0.0;
    }
    let shifted = DMatrix::identity(g.nrows(), g.ncols()) * lambda_max - &g;
    let (_, v) = power_iteration(&shifted);
    // Rayleigh quotient on the Gram matrix itself avoids λ_max − μ cancellation.
    let rq = v.dot(&(&g * &v)) / v.norm_squared();
    rq.max(0.0)
}
