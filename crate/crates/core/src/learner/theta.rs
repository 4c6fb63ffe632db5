use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{packed_diag_index, packed_len, pack_lower, unpack_lower};

/// Lower bound on every diagonal entry of both Cholesky factors.
pub const DIAG_LOWER_BOUND: f64 = 0.01;
/// Lower bound on the `(1, 1)` entry of the state-weight factor.
pub const FIRST_DIAG_LOWER_BOUND: f64 = 1.0;

/// Number of learnable parameters: packed lower triangles of both factors.
pub const fn theta_dim(nx: usize, nu: usize) -> usize {
    packed_len(nx) + packed_len(nu)
}

/// Packed Cholesky factors `L_Q` then `L_R`, row-major lower triangles, so
/// that `Q = L_Q L_Q'` and `R = L_R L_R'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    nx: usize,
    nu: usize,
    values: Vec<f64>,
}

impl Theta {
    pub fn new(nx: usize, nu: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || nu == 0 {
            return Err(invalid("theta dimensions must be positive"));
        }
        check_dim("theta length", theta_dim(nx, nu), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("theta entries must be finite"));
        }
        Ok(Self { nx, nu, values })
    }

    /// Identity factors, i.e. `Q = I`, `R = I`.
    pub fn identity(nx: usize, nu: usize) -> Self {
        Self::from_factors(&DMatrix::identity(nx, nx), &DMatrix::identity(nu, nu))
    }

    /// Packs the lower triangles of two factors; upper triangles are ignored.
    pub fn from_factors(lq: &DMatrix<f64>, lr: &DMatrix<f64>) -> Self {
        let mut values = pack_lower(lq);
        values.extend(pack_lower(lr));
        Self {
            nx: lq.nrows(),
            nu: lr.nrows(),
            values,
        }
    }

    /// Cholesky factors of two SPD matrices.
    pub fn from_matrices(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        let lq = q
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("Q"))?
            .unpack();
        let lr = r
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("R"))?
            .unpack();
        Ok(Self::from_factors(&lq, &lr))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn q_packed(&self) -> &[f64] {
        &self.values[..packed_len(self.nx)]
    }

    pub fn r_packed(&self) -> &[f64] {
        &self.values[packed_len(self.nx)..]
    }

    pub fn factors(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            unpack_lower(self.q_packed(), self.nx),
            unpack_lower(self.r_packed(), self.nu),
        )
    }

    /// `(Q_theta, R_theta)`.
    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (lq, lr) = self.factors();
        (&lq * lq.transpose(), &lr * lr.transpose())
    }

    /// Multiplies every factor entry by `c`; the matrices scale by `c^2`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            nx: self.nx,
            nu: self.nu,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Rescales so the `(1, 1)` entry of `L_Q` reaches its lower bound, then
    /// projects the remaining diagonal entries onto theirs.
    pub fn normalized(&self) -> Self {
        let first = self.values[0];
        let mut out = if first > 0.0 && first < FIRST_DIAG_LOWER_BOUND {
            self.scaled(FIRST_DIAG_LOWER_BOUND / first)
        } else {
            self.clone()
        };
        out.project();
        out
    }

    pub fn is_feasible(&self) -> bool {
        let lower = lower_bounds(self.nx, self.nu);
        self.values.iter().zip(&lower).all(|(v, l)| v >= l)
    }

    /// Clips entries onto [`lower_bounds`].
    pub fn project(&mut self) {
        let lower = lower_bounds(self.nx, self.nu);
        for (v, l) in self.values.iter_mut().zip(&lower) {
            if *v < *l {
                *v = *l;
            }
        }
    }
}

/// `(Q_theta, R_theta)` from packed factors.
pub fn theta_to_matrices(theta: &Theta) -> (DMatrix<f64>, DMatrix<f64>) {
    theta.matrices()
}

/// Per-entry lower bounds: `-inf` off the diagonal, [`DIAG_LOWER_BOUND`] on
/// it and [`FIRST_DIAG_LOWER_BOUND`] for the leading entry of `L_Q`.
pub fn lower_bounds(nx: usize, nu: usize) -> Vec<f64> {
    let mut lower = alloc::vec![f64::NEG_INFINITY; theta_dim(nx, nu)];
    for i in 0..nx {
        lower[packed_diag_index(i)] = DIAG_LOWER_BOUND;
    }
    let offset = packed_len(nx);
    for i in 0..nu {
        lower[offset + packed_diag_index(i)] = DIAG_LOWER_BOUND;
    }
    lower[0] = FIRST_DIAG_LOWER_BOUND;
    lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn dimensions() {
        assert_eq!(theta_dim(6, 2), 24);
        assert_eq!(theta_dim(1, 1), 2);
        assert_eq!(theta_dim(2, 1), 4);
        assert!(Theta::new(2, 1, alloc::vec![1.0; 3]).is_err());
    }

    #[test]
    fn identity_factors_give_identity_weights() {
        let (q, r) = theta_to_matrices(&Theta::identity(6, 2));
        assert_eq!(q, DMatrix::identity(6, 6));
        assert_eq!(r, DMatrix::identity(2, 2));
    }

    #[test]
    fn minimum_bound_theta() {
        let lower = lower_bounds(6, 2);
        let values = lower.iter().map(|l| if l.is_finite() { *l } else { 0.0 }).collect();
        let theta = Theta::new(6, 2, values).unwrap();
        assert!(theta.is_feasible());
        let (q, r) = theta.matrices();
        let mut qd = alloc::vec![1e-4; 6];
        qd[0] = 1.0;
        let expected_q = DMatrix::from_diagonal(&DVector::from_vec(qd));
        assert!((q - expected_q).amax() < 1e-18);
        assert!((r - DMatrix::identity(2, 2) * 1e-4).amax() < 1e-18);
    }

    #[test]
    fn bounds_layout() {
        let lower = lower_bounds(2, 2);
        // L_Q: (0,0) (1,0) (1,1); L_R: (0,0) (1,0) (1,1).
        assert_eq!(lower[0], 1.0);
        assert_eq!(lower[1], f64::NEG_INFINITY);
        assert_eq!(lower[2], 0.01);
        assert_eq!(lower[3], 0.01);
        assert_eq!(lower[4], f64::NEG_INFINITY);
        assert_eq!(lower[5], 0.01);
    }

    #[test]
    fn projection_and_normalization() {
        let mut t = Theta::new(1, 1, alloc::vec![0.5, -3.0]).unwrap();
        assert!(!t.is_feasible());
        let n = t.normalized();
        assert_eq!(n.as_slice(), &[1.0, 0.01]);
        t.project();
        assert_eq!(t.as_slice(), &[1.0, 0.01]);
        let scaled = Theta::new(1, 1, alloc::vec![0.25, 0.5]).unwrap().normalized();
        assert_eq!(scaled.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn from_matrices_rejects_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(Theta::from_matrices(&bad, &DMatrix::identity(1, 1)).is_err());
    }
}
