//! Discrete-time linear plants, simulation and LQR synthesis.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{expm, require_spd};
use crate::trajectory::Trajectory;

/// `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        if nx == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(invalid("system dimensions must be positive"));
        }
        check_dim("A columns", nx, a.ncols())?;
        check_dim("B rows", nx, b.nrows())?;
        check_dim("C columns", nx, c.ncols())?;
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("system matrices must be finite"));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Three equal masses in a row, joined to each other and to two walls by
/// identical springs, with forces acting on the two outer masses.
///
/// State `(p1, p2, p3, v1, v2, v3)`, input `(F1, F3)`, output `(p1, p2, p3)`.
/// Discretized exactly under a zero-order hold.
pub fn make_oscillating_masses(mass: f64, spring: f64, sample_time: f64) -> Result<LinearSystem> {
    if !(sample_time > 0.0 && sample_time.is_finite()) {
        return Err(invalid(format!("sample_time must be positive, got {sample_time}")));
    }
    let (ac, bc) = oscillating_masses_continuous(mass, spring)?;
    let (nx, nu) = (ac.nrows(), bc.ncols());
    // exp([Ac Bc; 0 0] * Ts) = [Ad Bd; 0 I].
    let mut m = DMatrix::zeros(nx + nu, nx + nu);
    m.view_mut((0, 0), (nx, nx)).copy_from(&ac);
    m.view_mut((0, nx), (nx, nu)).copy_from(&bc);
    let e = expm(&(m * sample_time))?;
    let a = e.view((0, 0), (nx, nx)).into_owned();
    let b = e.view((0, nx), (nx, nu)).into_owned();
    let np = nx / 2;
    let mut c = DMatrix::zeros(np, nx);
    for i in 0..np {
        c[(i, i)] = 1.0;
    }
    LinearSystem::new(a, b, c)
}

/// Continuous-time `(Ac, Bc)` of the three-mass chain behind
/// [`make_oscillating_masses`].
pub fn oscillating_masses_continuous(mass: f64, spring: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    for (name, v) in [("mass", mass), ("spring", spring)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    const NP: usize = 3;
    let k = spring / mass;
    let mut ac = DMatrix::zeros(2 * NP, 2 * NP);
    for i in 0..NP {
        ac[(i, NP + i)] = 1.0;
        ac[(NP + i, i)] = -2.0 * k;
        if i > 0 {
            ac[(NP + i, i - 1)] = k;
        }
        if i + 1 < NP {
            ac[(NP + i, i + 1)] = k;
        }
    }
    let mut bc = DMatrix::zeros(2 * NP, 2);
    bc[(NP, 0)] = 1.0 / mass;
    bc[(2 * NP - 1, 1)] = 1.0 / mass;
    Ok((ac, bc))
}

/// The plant used throughout the experiments: unit masses, spring constant 2, 0.2 s sampling.
pub fn default_oscillating_masses() -> LinearSystem {
    make_oscillating_masses(1.0, 2.0, 0.2).expect("default parameters are valid")
}

pub fn simulate(sys: &LinearSystem, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<Trajectory> {
    check_dim("initial state", sys.nx(), x0.len())?;
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut outputs = Vec::with_capacity(inputs.len());
    states.push(x0.clone());
    for u in inputs {
        check_dim("input", sys.nu(), u.len())?;
        let x = states.last().unwrap();
        outputs.push(sys.output(x));
        let next = sys.step(x, u);
        states.push(next);
    }
    Trajectory::new(states, inputs.to_vec(), outputs)
}

/// Relative DARE residual `|P - (Q + A'PA - A'PB (R + B'PB)^-1 B'PA)|_F / |P|_F`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    match riccati_map(a, b, q, r, p) {
        Some(next) => (p - next).norm() / p.norm().max(f64::MIN_POSITIVE),
        None => f64::INFINITY,
    }
}

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let pa = p * a;
    let pb = p * b;
    let s = r + b.transpose() * &pb;
    let gain = s.cholesky()?.solve(&(b.transpose() * &pa));
    let mut next = q + a.transpose() * &pa - (a.transpose() * &pb) * gain;
    next = (&next + next.transpose()) * 0.5;
    Some(next)
}

const DARE_MAX_ITERS: usize = 100_000;
const DARE_TOL: f64 = 1e-9;

/// Stabilizing DARE solution by fixed-point Riccati iteration from `P = Q`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let nx = a.nrows();
    check_dim("A columns", nx, a.ncols())?;
    check_dim("B rows", nx, b.nrows())?;
    check_dim("Q size", nx, q.nrows())?;
    check_dim("R size", b.ncols(), r.nrows())?;
    require_spd(q, "Q")?;
    require_spd(r, "R")?;
    let mut p = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERS {
        let next = riccati_map(a, b, q, r, &p).ok_or(Error::NotPositiveDefinite("R + B'PB"))?;
        let step = (&next - &p).norm() / next.norm().max(f64::MIN_POSITIVE);
        p = next;
        if !step.is_finite() {
            break;
        }
        // `step` is the residual of the previous iterate; confirm on the new one.
        if step <= DARE_TOL {
            residual = dare_residual(a, b, q, r, &p);
            if residual <= DARE_TOL {
                return Ok(p);
            }
        }
        residual = step;
    }
    Err(Error::NotConverged {
        what: "Riccati iteration",
        iterations: DARE_MAX_ITERS,
        residual,
    })
}

/// `K = (R + B'PB)^-1 B'PA`, so that `u = -K x` is the LQR law.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = solve_dare(a, b, q, r)?;
    let s = r + b.transpose() * &p * b;
    s.cholesky()
        .map(|c| c.solve(&(b.transpose() * &p * a)))
        .ok_or(Error::NotPositiveDefinite("R + B'PB"))
}

/// Unconstrained closed loop `u_k = -K x_k` for `n` steps.
pub fn rollout_lqr(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    x0: &DVector<f64>,
    n: usize,
) -> Result<Trajectory> {
    check_dim("gain rows", sys.nu(), k.nrows())?;
    check_dim("gain columns", sys.nx(), k.ncols())?;
    check_dim("initial state", sys.nx(), x0.len())?;
    if n == 0 {
        return Err(invalid("rollout horizon must be positive"));
    }
    let mut inputs = Vec::with_capacity(n);
    let mut x = x0.clone();
    for _ in 0..n {
        let u = -(k * &x);
        x = sys.step(&x, &u);
        inputs.push(u);
    }
    simulate(sys, x0, &inputs)
}
