//! Small dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled so that its 1-norm is at most 1/2; 20 Taylor terms
/// then put the truncation error far below machine precision.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(invalid("matrix exponential needs a square matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix exponential of a non-finite matrix"));
    }
    let n = m.nrows();
    let norm = one_norm(m);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// True when `m` is square, symmetric (relative tolerance) and admits a Cholesky factor.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    if asymmetry(m) > 1e-10 * scale {
        return false;
    }
    m.clone().cholesky().is_some()
}

pub(crate) fn require_spd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if is_spd(m) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(what))
    }
}

/// Number of entries of an `n x n` lower-triangular matrix.
pub const fn packed_len(n: usize) -> usize {
    n + n * (n.saturating_sub(1)) / 2
}

/// Position of diagonal entry `(i, i)` in row-major packed lower-triangular storage.
pub const fn packed_diag_index(i: usize) -> usize {
    i * (i + 1) / 2 + i
}

/// Packs the lower triangle of `l` row by row.
pub fn pack_lower(l: &DMatrix<f64>) -> Vec<f64> {
    let n = l.nrows();
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        for j in 0..=i {
            out.push(l[(i, j)]);
        }
    }
    out
}

/// Inverse of [`pack_lower`]; the strict upper triangle is zero.
pub fn unpack_lower(packed: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(packed.len(), packed_len(n));
    let mut l = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = packed[idx];
            idx += 1;
        }
    }
    l
}

/// Quadratic form `v' M v`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        let mut col = 0.0;
        for i in 0..m.nrows() {
            col += v[i] * m[(i, j)];
        }
        acc += col * v[j];
    }
    acc
}

/// Spectral radius from the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .fold(0.0, f64::max)
}

/// Power-iteration estimate of the largest eigenvalue of a symmetric PSD matrix.
///
/// Stops after `max_iters` iterations or once the Rayleigh quotient changes by
/// less than `rel_tol` relative.
pub fn power_iteration_lmax(m: &DMatrix<f64>, max_iters: usize, rel_tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Non-uniform start so it is unlikely to be orthogonal to the top eigenvector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) / (n as f64));
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}
