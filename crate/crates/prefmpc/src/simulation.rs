//! Single closed-loop runs in a self-describing payload shared by the CLI
//! and the HTTP service.

use nalgebra::{DMatrix, DVector};
use prefmpc_core::mpc::{closed_loop, MpcSpec, SolveStatus};
use prefmpc_core::trajectory::{max_input_inf_norm, quad_cost, settling_time};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::TrajectoryDoc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    /// Closed-loop cost under the oracle weights, when they are configured.
    pub phi: Option<f64>,
    /// Settling index; equals the run length when `settled` is false.
    pub kappa: usize,
    pub settled: bool,
    pub eps: f64,
    pub max_input: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDoc {
    pub x0: Vec<f64>,
    pub trajectory: TrajectoryDoc,
    pub metrics: MetricsDoc,
    /// QP iterations per step.
    pub qp_iterations: Vec<usize>,
    /// Steps whose QP hit the iteration cap.
    pub unconverged_steps: usize,
}

pub fn simulate(
    spec: &MpcSpec,
    x0: &DVector<f64>,
    t_sim: usize,
    eps: f64,
    performance_weights: Option<&(DMatrix<f64>, DMatrix<f64>)>,
) -> Result<SimulationDoc> {
    let run = closed_loop(spec, x0, t_sim)?;
    let traj = &run.trajectory;
    let phi = match performance_weights {
        Some((q, r)) => Some(quad_cost(traj, q, r)?),
        None => None,
    };
    let kappa = settling_time(traj, eps);
    Ok(SimulationDoc {
        x0: x0.iter().copied().collect(),
        trajectory: traj.into(),
        metrics: MetricsDoc {
            phi,
            kappa: kappa.index,
            settled: kappa.settled,
            eps,
            max_input: max_input_inf_norm(traj),
        },
        unconverged_steps: run.status.iter().filter(|s| **s != SolveStatus::Converged).count(),
        qp_iterations: run.iterations,
    })
}
