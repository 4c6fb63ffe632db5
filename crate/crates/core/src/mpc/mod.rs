//! Box-constrained linear MPC with a quadratic stage cost: condensing,
//! the QP solver, closed-loop simulation and campaign evaluation.

mod campaign;
mod closed_loop;
mod condense;
mod qp;

pub use campaign::{
    evaluate_campaign, mean_output_norms, median, CampaignConfig, CampaignEntry, CampaignResult, Controller,
    PerformanceRow, RunMetrics, Summary,
};
pub use closed_loop::{closed_loop, mpc_step, ClosedLoopResult, MpcController};
pub use condense::{condense, prediction_matrices};
pub use qp::{
    accelerated_projected_gradient, kkt_violation, lipschitz_estimate, solve_box_qp, QpProblem, QpSolution,
    SolveStatus, QP_MAX_ITERS, QP_TOL,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::require_spd;
use crate::linsys::LinearSystem;

/// Input box `lo <= u_k <= hi`, applied at every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBounds {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl InputBounds {
    /// `-limit <= u_i <= limit` for every component.
    pub fn symmetric(nu: usize, limit: f64) -> Self {
        Self {
            lo: DVector::from_element(nu, -limit),
            hi: DVector::from_element(nu, limit),
        }
    }
}

/// A controller: plant, horizon, stage weights and optional input box.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    system: LinearSystem,
    horizon: usize,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    bounds: Option<InputBounds>,
}

impl MpcSpec {
    pub fn new(
        system: LinearSystem,
        horizon: usize,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        bounds: Option<InputBounds>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("MPC horizon must be positive"));
        }
        check_dim("state weight rows", system.nx(), q.nrows())?;
        check_dim("state weight columns", system.nx(), q.ncols())?;
        check_dim("input weight rows", system.nu(), r.nrows())?;
        check_dim("input weight columns", system.nu(), r.ncols())?;
        require_spd(&q, "MPC state weight")?;
        require_spd(&r, "MPC input weight")?;
        if let Some(b) = &bounds {
            check_dim("lower input bound", system.nu(), b.lo.len())?;
            check_dim("upper input bound", system.nu(), b.hi.len())?;
            let origin_feasible = b.lo.iter().all(|&v| v <= 0.0) && b.hi.iter().all(|&v| v >= 0.0);
            if !origin_feasible {
                return Err(invalid("input bounds must contain the origin"));
            }
        }
        Ok(Self {
            system,
            horizon,
            q,
            r,
            bounds,
        })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn bounds(&self) -> Option<&InputBounds> {
        self.bounds.as_ref()
    }

    /// Same controller with both weights multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.system.clone(),
            self.horizon,
            &self.q * c,
            &self.r * c,
            self.bounds.clone(),
        )
    }
}
