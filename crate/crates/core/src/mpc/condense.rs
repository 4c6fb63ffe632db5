use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};
use crate::linsys::LinearSystem;

use super::qp::QpProblem;
use super::MpcSpec;

/// `(G, F)` with stacked predicted states `[x_0; ...; x_{N-1}] = G U + F x`.
pub fn prediction_matrices(sys: &LinearSystem, horizon: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut f = DMatrix::zeros(horizon * nx, nx);
    let mut g = DMatrix::zeros(horizon * nx, horizon * nu);
    // powers[k] = A^k
    let mut powers = alloc::vec::Vec::with_capacity(horizon);
    powers.push(DMatrix::<f64>::identity(nx, nx));
    for k in 1..horizon {
        let next = sys.a() * &powers[k - 1];
        powers.push(next);
    }
    for k in 0..horizon {
        f.view_mut((k * nx, 0), (nx, nx)).copy_from(&powers[k]);
        // x_k depends on u_j for j < k through A^{k-1-j} B.
        for j in 0..k {
            let block = &powers[k - 1 - j] * sys.b();
            g.view_mut((k * nx, j * nu), (nx, nu)).copy_from(&block);
        }
    }
    (g, f)
}

/// Parts of the condensed problem that do not depend on the current state.
#[derive(Debug, Clone)]
pub(crate) struct Condensed {
    pub h: DMatrix<f64>,
    /// `f = linear * x`.
    pub linear: DMatrix<f64>,
    /// `constant = x' quadratic x`.
    pub quadratic: DMatrix<f64>,
    pub bounds: Option<(DVector<f64>, DVector<f64>)>,
}

impl Condensed {
    pub fn new(spec: &MpcSpec) -> Self {
        let sys = spec.system();
        let (n, nx, nu) = (spec.horizon(), sys.nx(), sys.nu());
        let (g, f) = prediction_matrices(sys, n);
        let mut qbar = DMatrix::zeros(n * nx, n * nx);
        let mut rbar = DMatrix::zeros(n * nu, n * nu);
        for k in 0..n {
            qbar.view_mut((k * nx, k * nx), (nx, nx)).copy_from(spec.q());
            rbar.view_mut((k * nu, k * nu), (nu, nu)).copy_from(spec.r());
        }
        let qg = &qbar * &g;
        let mut h = (g.transpose() * &qg + &rbar) * 2.0;
        // Exact symmetry keeps the Cholesky factorization well defined.
        h = (&h + h.transpose()) * 0.5;
        let linear = qg.transpose() * &f * 2.0;
        let mut quadratic = f.transpose() * &qbar * &f;
        quadratic = (&quadratic + quadratic.transpose()) * 0.5;
        let bounds = spec.bounds().map(|b| {
            let mut lo = DVector::zeros(n * nu);
            let mut hi = DVector::zeros(n * nu);
            for k in 0..n {
                lo.rows_mut(k * nu, nu).copy_from(&b.lo);
                hi.rows_mut(k * nu, nu).copy_from(&b.hi);
            }
            (lo, hi)
        });
        Self {
            h,
            linear,
            quadratic,
            bounds,
        }
    }

    pub fn at(&self, x: &DVector<f64>) -> QpProblem {
        QpProblem {
            h: self.h.clone(),
            f: &self.linear * x,
            bounds: self.bounds.clone(),
            constant: x.dot(&(&self.quadratic * x)),
        }
    }
}

/// The MPC problem at state `x` as a QP over the stacked inputs
/// `U = [u_0; ...; u_{N-1}]`: `H = 2(G'QG + R)`, `f = 2G'QF x`. The objective
/// plus `constant` equals the horizon cost of the predicted trajectory.
pub fn condense(spec: &MpcSpec, x: &DVector<f64>) -> Result<QpProblem> {
    check_dim("MPC state", spec.system().nx(), x.len())?;
    Ok(Condensed::new(spec).at(x))
}
