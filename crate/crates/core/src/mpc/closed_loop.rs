use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::trajectory::Trajectory;

use super::condense::Condensed;
use super::qp::{accelerated_projected_gradient, lipschitz_estimate, QpSolution, SolveStatus};
use super::MpcSpec;

/// Receding-horizon controller with everything that does not depend on the
/// state precomputed.
#[derive(Debug, Clone)]
pub struct MpcController {
    spec: MpcSpec,
    condensed: Condensed,
    chol: Cholesky<f64, Dyn>,
    lipschitz: f64,
}

impl MpcController {
    pub fn new(spec: &MpcSpec) -> Result<Self> {
        let condensed = Condensed::new(spec);
        let chol = condensed
            .h
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("QP Hessian"))?;
        let lipschitz = if condensed.bounds.is_some() {
            lipschitz_estimate(&condensed.h)
        } else {
            0.0
        };
        Ok(Self {
            spec: spec.clone(),
            condensed,
            chol,
            lipschitz,
        })
    }

    pub fn spec(&self) -> &MpcSpec {
        &self.spec
    }

    /// Optimal stacked input sequence at state `x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<QpSolution> {
        check_dim("MPC state", self.spec.system().nx(), x.len())?;
        let qp = self.condensed.at(x);
        let unconstrained = self.chol.solve(&(-&qp.f));
        if qp.bounds.is_none() {
            return Ok(QpSolution {
                u: unconstrained,
                iterations: 0,
                status: SolveStatus::Converged,
            });
        }
        Ok(accelerated_projected_gradient(&qp, unconstrained, self.lipschitz))
    }

    /// First input block of the optimal sequence and the solver outcome.
    pub fn step(&self, x: &DVector<f64>) -> Result<(DVector<f64>, QpSolution)> {
        let sol = self.solve(x)?;
        let nu = self.spec.system().nu();
        Ok((sol.u.rows(0, nu).into_owned(), sol))
    }
}

/// `u_0*` of the MPC problem at `x`.
pub fn mpc_step(spec: &MpcSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(MpcController::new(spec)?.step(x)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopResult {
    /// `T_sim` steps: states `x_0..x_T`, applied inputs and measured outputs.
    pub trajectory: Trajectory,
    pub iterations: Vec<usize>,
    pub status: Vec<SolveStatus>,
}

/// Applies the MPC law to the plant for `t_sim` steps from `x0`.
///
/// A solve that stops at the iteration cap still yields a feasible input
/// and is recorded in `status`; non-finite inputs abort with the step index.
pub fn closed_loop(spec: &MpcSpec, x0: &DVector<f64>, t_sim: usize) -> Result<ClosedLoopResult> {
    let controller = MpcController::new(spec)?;
    run(&controller, x0, t_sim)
}

pub(crate) fn run(controller: &MpcController, x0: &DVector<f64>, t_sim: usize) -> Result<ClosedLoopResult> {
    let sys = controller.spec().system();
    check_dim("initial state", sys.nx(), x0.len())?;
    if t_sim == 0 {
        return Err(crate::error::invalid("closed-loop length must be positive"));
    }
    let mut states = Vec::with_capacity(t_sim + 1);
    let mut inputs = Vec::with_capacity(t_sim);
    let mut outputs = Vec::with_capacity(t_sim);
    let mut iterations = Vec::with_capacity(t_sim);
    let mut status = Vec::with_capacity(t_sim);
    let mut x = x0.clone();
    for step in 0..t_sim {
        let (u, sol) = controller.step(&x).map_err(|e| Error::ClosedLoop {
            step,
            reason: format!("{e}"),
        })?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::ClosedLoop {
                step,
                reason: "solver returned a non-finite input".into(),
            });
        }
        let next = sys.step(&x, &u);
        outputs.push(sys.output(&x));
        states.push(x);
        inputs.push(u);
        iterations.push(sol.iterations);
        status.push(sol.status);
        x = next;
    }
    states.push(x);
    Ok(ClosedLoopResult {
        trajectory: Trajectory::new(states, inputs, outputs)?,
        iterations,
        status,
    })
}
