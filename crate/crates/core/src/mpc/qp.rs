//! Dense strictly convex QP with optional box constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::power_iteration_lmax;

/// `min 0.5 U'HU + f'U  s.t.  lb <= U <= ub`, plus the constant dropped by
/// condensing so that the objective value can be compared with a rollout cost.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub bounds: Option<(DVector<f64>, DVector<f64>)>,
    pub constant: f64,
}

impl QpProblem {
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.f.dot(u) + self.constant
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.h * u + &self.f
    }

    pub fn project(&self, u: &mut DVector<f64>) {
        if let Some((lb, ub)) = &self.bounds {
            for i in 0..u.len() {
                u[i] = u[i].max(lb[i]).min(ub[i]);
            }
        }
    }

    /// `|u - P(u - grad)|_2`.
    pub fn projected_gradient_norm(&self, u: &DVector<f64>) -> f64 {
        let g = self.gradient(u);
        let mut p = u - &g;
        self.project(&mut p);
        (u - p).norm()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f.len();
        check_dim("QP Hessian rows", n, self.h.nrows())?;
        check_dim("QP Hessian columns", n, self.h.ncols())?;
        if let Some((lb, ub)) = &self.bounds {
            check_dim("QP lower bound", n, lb.len())?;
            check_dim("QP upper bound", n, ub.len())?;
            if lb.iter().zip(ub.iter()).any(|(l, u)| l > u) {
                return Err(invalid("QP bounds are inconsistent"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Converged,
    /// Iteration cap hit; the returned point is feasible but not certified optimal.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

pub const QP_TOL: f64 = 1e-8;
pub const QP_MAX_ITERS: usize = 5000;
const POWER_ITERS: usize = 100;
const POWER_TOL: f64 = 1e-6;
/// Power iteration approaches the top eigenvalue from below; inflate it so
/// the fixed step stays below `1 / lambda_max`.
const LIPSCHITZ_SAFETY: f64 = 1.01;
const POLISH_EVERY: usize = 10;

/// Step-size constant for projected gradient on `qp`.
pub fn lipschitz_estimate(h: &DMatrix<f64>) -> f64 {
    LIPSCHITZ_SAFETY * power_iteration_lmax(h, POWER_ITERS, POWER_TOL)
}

/// Direct Cholesky solve without bounds; accelerated projected gradient with
/// them.
pub fn solve_box_qp(qp: &QpProblem) -> Result<QpSolution> {
    qp.validate()?;
    let chol = qp
        .h
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("QP Hessian"))?;
    let unconstrained = chol.solve(&(-&qp.f));
    if qp.bounds.is_none() {
        return Ok(QpSolution {
            u: unconstrained,
            iterations: 0,
            status: SolveStatus::Converged,
        });
    }
    let lipschitz = lipschitz_estimate(&qp.h);
    Ok(accelerated_projected_gradient(qp, unconstrained, lipschitz))
}

/// FISTA with fixed step `1 / L` and gradient-based momentum restart, started
/// from the projection of `start`.
///
/// Every few iterations the current active set is tried directly: the
/// equality-constrained minimizer on the free variables is accepted when it
/// is feasible and meets the projected-gradient tolerance.
pub fn accelerated_projected_gradient(qp: &QpProblem, start: DVector<f64>, lipschitz: f64) -> QpSolution {
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let mut u = start;
    qp.project(&mut u);
    if qp.projected_gradient_norm(&u) <= QP_TOL {
        return QpSolution {
            u,
            iterations: 0,
            status: SolveStatus::Converged,
        };
    }
    let mut y = u.clone();
    let mut t = 1.0f64;
    for it in 1..=QP_MAX_ITERS {
        let g = qp.gradient(&y);
        let mut next = &y - g * step;
        qp.project(&mut next);
        // Restart momentum when the step opposes the previous direction.
        if (&y - &next).dot(&(&next - &u)) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
        y = &next + (&next - &u) * ((t - 1.0) / t_next);
        u = next;
        t = t_next;
        if qp.projected_gradient_norm(&u) <= QP_TOL {
            return QpSolution {
                u,
                iterations: it,
                status: SolveStatus::Converged,
            };
        }
        if it % POLISH_EVERY == 0 {
            if let Some(p) = polish(qp, &u) {
                return QpSolution {
                    u: p,
                    iterations: it,
                    status: SolveStatus::Converged,
                };
            }
        }
    }
    QpSolution {
        u,
        iterations: QP_MAX_ITERS,
        status: SolveStatus::MaxIterations,
    }
}

/// Solves on the free set implied by which coordinates of `u` sit on a bound.
fn polish(qp: &QpProblem, u: &DVector<f64>) -> Option<DVector<f64>> {
    let (lb, ub) = qp.bounds.as_ref()?;
    let n = u.len();
    let free: alloc::vec::Vec<usize> = (0..n).filter(|&i| u[i] > lb[i] && u[i] < ub[i]).collect();
    let mut candidate = u.clone();
    if !free.is_empty() {
        let m = free.len();
        let mut hff = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                hff[(a, b)] = qp.h[(i, j)];
            }
            let mut r = -qp.f[i];
            for j in 0..n {
                if !free.contains(&j) {
                    r -= qp.h[(i, j)] * u[j];
                }
            }
            rhs[a] = r;
        }
        let sol = hff.cholesky()?.solve(&rhs);
        for (a, &i) in free.iter().enumerate() {
            if sol[a] < lb[i] || sol[a] > ub[i] {
                return None;
            }
            candidate[i] = sol[a];
        }
    }
    (qp.projected_gradient_norm(&candidate) <= QP_TOL).then_some(candidate)
}

/// Largest violation of the first-order optimality conditions of a box QP.
pub fn kkt_violation(qp: &QpProblem, u: &DVector<f64>) -> f64 {
    let g = qp.gradient(u);
    let mut worst = 0.0f64;
    for i in 0..u.len() {
        let v = match &qp.bounds {
            None => g[i].abs(),
            Some((lb, ub)) => {
                let infeasible = (lb[i] - u[i]).max(u[i] - ub[i]).max(0.0);
                let stationarity = if u[i] <= lb[i] && u[i] >= ub[i] {
                    0.0
                } else if u[i] <= lb[i] {
                    (-g[i]).max(0.0)
                } else if u[i] >= ub[i] {
                    g[i].max(0.0)
                } else {
                    g[i].abs()
                };
                infeasible.max(stationarity)
            }
        };
        worst = worst.max(v);
    }
    worst
}
