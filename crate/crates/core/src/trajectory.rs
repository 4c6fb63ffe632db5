//! Finite trajectories and the scalar metrics evaluated on them.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::quad_form;

/// States `x_0..x_N`, inputs `u_0..u_{N-1}` and outputs `y_0..y_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Validates lengths (`N+1`, `N`, `N`) and that every vector in a
    /// sequence has the same dimension.
    pub fn new(
        states: Vec<DVector<f64>>,
        inputs: Vec<DVector<f64>>,
        outputs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(invalid("trajectory horizon must be positive"));
        }
        check_dim("trajectory states", n + 1, states.len())?;
        check_dim("trajectory outputs", n, outputs.len())?;
        for seq in [&states, &inputs, &outputs] {
            let d = seq[0].len();
            for v in seq.iter() {
                check_dim("trajectory vector", d, v.len())?;
            }
        }
        Ok(Self {
            states,
            inputs,
            outputs,
        })
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[DVector<f64>] {
        &self.outputs
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs[0].len()
    }

    /// Sums of outer products `sum x_k x_k'` and `sum u_k u_k'` over `k < N`.
    ///
    /// `quad_cost(T, Q, R) = <Q, Sx> + <R, Su>`, which makes the cost linear
    /// in the weights.
    pub fn gram(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let nx = self.state_dim();
        let nu = self.input_dim();
        let mut sx = DMatrix::zeros(nx, nx);
        let mut su = DMatrix::zeros(nu, nu);
        for k in 0..self.horizon() {
            sx.ger(1.0, &self.states[k], &self.states[k], 1.0);
            su.ger(1.0, &self.inputs[k], &self.inputs[k], 1.0);
        }
        (sx, su)
    }
}

/// Output settling time with the never-settled sentinel `index == N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SettlingResult {
    pub settled: bool,
    pub index: usize,
}

/// `sum_{k=0}^{N-1} |x_k|_Q^2 + |u_k|_R^2`; the terminal state is not penalized.
pub fn quad_cost(traj: &Trajectory, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    check_dim("state weight", traj.state_dim(), q.nrows())?;
    check_dim("state weight", traj.state_dim(), q.ncols())?;
    check_dim("input weight", traj.input_dim(), r.nrows())?;
    check_dim("input weight", traj.input_dim(), r.ncols())?;
    let mut cost = 0.0;
    for k in 0..traj.horizon() {
        cost += quad_form(q, &traj.states[k]) + quad_form(r, &traj.inputs[k]);
    }
    Ok(cost)
}

/// Smallest `k` such that `|y_l| <= eps` for every `l >= k`.
pub fn settling_time(traj: &Trajectory, eps: f64) -> SettlingResult {
    let n = traj.outputs.len();
    let last_violation = traj.outputs.iter().rposition(|y| y.norm() > eps);
    match last_violation {
        None => SettlingResult {
            settled: true,
            index: 0,
        },
        Some(k) if k + 1 == n => SettlingResult {
            settled: false,
            index: n,
        },
        Some(k) => SettlingResult {
            settled: true,
            index: k + 1,
        },
    }
}

/// `max_k |u_k|_inf`.
pub fn max_input_inf_norm(traj: &Trajectory) -> f64 {
    traj.inputs.iter().map(|u| u.amax()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar_traj(x: &[f64], u: &[f64]) -> Trajectory {
        let states = x.iter().map(|v| DVector::from_element(1, *v)).collect();
        let inputs = u.iter().map(|v| DVector::from_element(1, *v)).collect();
        let outputs = x[..u.len()]
            .iter()
            .map(|v| DVector::from_element(1, *v))
            .collect();
        Trajectory::new(states, inputs, outputs).unwrap()
    }

    fn with_output_norms(norms: &[f64]) -> Trajectory {
        let n = norms.len();
        Trajectory::new(
            vec![DVector::zeros(1); n + 1],
            vec![DVector::zeros(1); n],
            norms.iter().map(|v| DVector::from_element(1, *v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_lengths() {
        let v = || DVector::<f64>::zeros(2);
        assert!(Trajectory::new(vec![v(), v()], vec![v(), v()], vec![v(), v()]).is_err());
        assert!(Trajectory::new(vec![v()], vec![], vec![]).is_err());
        assert!(Trajectory::new(vec![v(), DVector::zeros(3)], vec![v()], vec![v()]).is_err());
    }

    #[test]
    fn quad_cost_examples() {
        let zero = scalar_traj(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        let one = DMatrix::identity(1, 1);
        assert_eq!(quad_cost(&zero, &one, &one).unwrap(), 0.0);

        // X = (1, 2, .), U = (3, 4): 1 + 9 + 4 + 16.
        let t = scalar_traj(&[1.0, 2.0, 100.0], &[3.0, 4.0]);
        assert_eq!(quad_cost(&t, &one, &one).unwrap(), 30.0);

        let mut x0 = DVector::zeros(6);
        x0[0] = 1.0;
        let t = Trajectory::new(
            vec![x0.clone(), DVector::zeros(6)],
            vec![DVector::zeros(2)],
            vec![DVector::zeros(3)],
        )
        .unwrap();
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![40.0, 40.0, 40.0, 5.0, 5.0, 5.0]));
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.2]));
        assert_eq!(quad_cost(&t, &q, &r).unwrap(), 40.0);
        assert!(quad_cost(&t, &r, &q).is_err());
    }

    #[test]
    fn gram_reproduces_cost() {
        let t = scalar_traj(&[1.0, -2.0, 5.0], &[3.0, 0.5]);
        let q = DMatrix::from_element(1, 1, 2.0);
        let r = DMatrix::from_element(1, 1, 0.3);
        let (sx, su) = t.gram();
        let via_gram = q.dot(&sx) + r.dot(&su);
        assert!((via_gram - quad_cost(&t, &q, &r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn settling_examples() {
        let zero = with_output_norms(&[0.0; 4]);
        assert_eq!(
            settling_time(&zero, 0.1),
            SettlingResult {
                settled: true,
                index: 0
            }
        );
        let t = with_output_norms(&[0.5, 0.05, 0.2, 0.05, 0.05]);
        assert_eq!(
            settling_time(&t, 0.1),
            SettlingResult {
                settled: true,
                index: 3
            }
        );
        let t = with_output_norms(&[0.2; 5]);
        assert_eq!(
            settling_time(&t, 0.1),
            SettlingResult {
                settled: false,
                index: 5
            }
        );
        // Exactly at the threshold counts as settled.
        let t = with_output_norms(&[0.3, 0.1]);
        assert_eq!(settling_time(&t, 0.1).index, 1);
    }

    #[test]
    fn max_input_examples() {
        let t = Trajectory::new(
            vec![DVector::zeros(1); 3],
            vec![
                DVector::from_vec(vec![1.0, -3.0]),
                DVector::from_vec(vec![2.0, 0.0]),
            ],
            vec![DVector::zeros(1); 2],
        )
        .unwrap();
        assert_eq!(max_input_inf_norm(&t), 3.0);
        let z = scalar_traj(&[0.0, 0.0], &[0.0]);
        assert_eq!(max_input_inf_norm(&z), 0.0);
    }
}
