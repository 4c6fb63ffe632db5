//! Synthetic preference functions standing in for a human labeler.

use nalgebra::DMatrix;

use crate::error::{check_dim, invalid, Result};
use crate::trajectory::{max_input_inf_norm, quad_cost, settling_time, Trajectory};

/// Binary preference label; `First` (1) means the first trajectory wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preference {
    Second = 0,
    First = 1,
}

impl Preference {
    /// `First` when the first argument is preferred or the comparison ties.
    pub fn first_if(cond: bool) -> Self {
        if cond {
            Preference::First
        } else {
            Preference::Second
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        (self as u8) as f64
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Preference::Second),
            1 => Ok(Preference::First),
            _ => Err(invalid("preference label must be 0 or 1")),
        }
    }
}

fn check_pair(ti: &Trajectory, tj: &Trajectory) -> Result<()> {
    check_dim("pair horizon", ti.horizon(), tj.horizon())?;
    check_dim("pair state dimension", ti.state_dim(), tj.state_dim())?;
    check_dim("pair input dimension", ti.input_dim(), tj.input_dim())?;
    check_dim("pair output dimension", ti.output_dim(), tj.output_dim())
}

/// Prefers the trajectory with the smaller quadratic cost; ties go to `ti`.
pub fn pref_quadratic(
    ti: &Trajectory,
    tj: &Trajectory,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<Preference> {
    check_pair(ti, tj)?;
    Ok(Preference::first_if(
        quad_cost(ti, q, r)? <= quad_cost(tj, q, r)?,
    ))
}

/// Prefers the smaller peak input magnitude; ties go to `ti`.
pub fn pref_input(ti: &Trajectory, tj: &Trajectory) -> Preference {
    Preference::first_if(max_input_inf_norm(ti) <= max_input_inf_norm(tj))
}

/// Prefers the shorter output settling time, falling back to [`pref_input`]
/// when the settling indices (including the never-settled sentinel) tie.
pub fn pref_settling(ti: &Trajectory, tj: &Trajectory, eps: f64) -> Result<Preference> {
    check_pair(ti, tj)?;
    let ki = settling_time(ti, eps).index;
    let kj = settling_time(tj, eps).index;
    Ok(match ki.cmp(&kj) {
        core::cmp::Ordering::Less => Preference::First,
        core::cmp::Ordering::Greater => Preference::Second,
        core::cmp::Ordering::Equal => pref_input(ti, tj),
    })
}

/// Fraction of positions where the two label sequences agree.
pub fn accuracy(predicted: &[Preference], reference: &[Preference]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(invalid("accuracy of an empty label sequence"));
    }
    check_dim("label sequences", predicted.len(), reference.len())?;
    let hits = predicted
        .iter()
        .zip(reference)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// A preference function that can label trajectory pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceOracle {
    /// Smaller `phi_N(T; Q, R)` wins.
    Quadratic { q: DMatrix<f64>, r: DMatrix<f64> },
    /// Shorter output settling time wins, ties broken by peak input.
    Settling { eps: f64 },
}

impl PreferenceOracle {
    pub fn prefer(&self, ti: &Trajectory, tj: &Trajectory) -> Result<Preference> {
        match self {
            PreferenceOracle::Quadratic { q, r } => pref_quadratic(ti, tj, q, r),
            PreferenceOracle::Settling { eps } => pref_settling(ti, tj, *eps),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use nalgebra::DVector;

    fn scalar_traj(x: &[f64], u: &[f64]) -> Trajectory {
        let n = u.len();
        Trajectory::new(
            x.iter().map(|v| DVector::from_element(1, *v)).collect(),
            u.iter().map(|v| DVector::from_element(1, *v)).collect(),
            x[..n].iter().map(|v| DVector::from_element(1, *v)).collect(),
        )
        .unwrap()
    }

    fn eye() -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    #[test]
    fn quadratic_preferences() {
        let zero = scalar_traj(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        let a = scalar_traj(&[1.0, 2.0, 0.0], &[3.0, 4.0]); // cost 30
        let b = scalar_traj(&[2.0, 2.0, 0.0], &[3.0, 0.0]); // cost 4 + 4 + 9 = 17
        assert_eq!(pref_quadratic(&zero, &a, &eye(), &eye()).unwrap(), Preference::First);
        assert_eq!(pref_quadratic(&a, &a, &eye(), &eye()).unwrap(), Preference::First);
        assert_eq!(pref_quadratic(&a, &b, &eye(), &eye()).unwrap(), Preference::Second);
        assert_eq!(pref_quadratic(&b, &a, &eye(), &eye()).unwrap(), Preference::First);
        let short = scalar_traj(&[0.0, 0.0], &[0.0]);
        assert!(pref_quadratic(&short, &a, &eye(), &eye()).is_err());
    }

    #[test]
    fn input_preferences() {
        let zero = scalar_traj(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        let three = scalar_traj(&[0.0, 0.0, 0.0], &[1.0, -3.0]);
        let two = scalar_traj(&[0.0, 0.0, 0.0], &[2.0, 0.0]);
        assert_eq!(pref_input(&zero, &three), Preference::First);
        assert_eq!(pref_input(&three, &three), Preference::First);
        assert_eq!(pref_input(&three, &two), Preference::Second);
    }

    #[test]
    fn settling_preferences() {
        // Outputs equal states here; eps = 0.1.
        let fast = scalar_traj(&[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0], &[9.0; 6]); // kappa 2
        let slow = scalar_traj(&[0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0], &[0.0; 6]); // kappa 5
        assert_eq!(pref_settling(&fast, &slow, 0.1).unwrap(), Preference::First);
        assert_eq!(pref_settling(&slow, &fast, 0.1).unwrap(), Preference::Second);

        let same_kappa_small_u = scalar_traj(&[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0], &[1.0; 6]);
        assert_eq!(pref_settling(&same_kappa_small_u, &fast, 0.1).unwrap(), Preference::First);

        // Both never settle: sentinel tie, decided by peak input.
        let stuck_big = scalar_traj(&[1.0; 7], &[5.0; 6]);
        let stuck_small = scalar_traj(&[1.0; 7], &[0.5; 6]);
        assert_eq!(pref_settling(&stuck_big, &stuck_small, 0.1).unwrap(), Preference::Second);
    }

    #[test]
    fn accuracy_examples() {
        use Preference::*;
        let a = vec![First, Second, First, First];
        let flipped: Vec<_> = a
            .iter()
            .map(|p| if *p == First { Second } else { First })
            .collect();
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        assert_eq!(accuracy(&a, &flipped).unwrap(), 0.0);
        assert_eq!(accuracy(&a, &[First, Second, First, Second]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&a, &a[..2]).is_err());
    }

    #[test]
    fn label_conversions() {
        assert_eq!(Preference::from_u8(1).unwrap(), Preference::First);
        assert_eq!(Preference::Second.as_f64(), 0.0);
        assert!(Preference::from_u8(2).is_err());
    }
}
