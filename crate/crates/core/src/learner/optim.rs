//! First-order and limited-memory quasi-Newton solvers for box-constrained
//! smooth minimization.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Objective returning the value and writing the gradient.
pub trait Differentiable {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Differentiable for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

/// Box `lower <= x <= upper`; infinite entries are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn lower_only(lower: Vec<f64>) -> Self {
        let upper = alloc::vec![f64::INFINITY; lower.len()];
        Self { lower, upper }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(*l).min(*u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, l), u)| *l <= *v && *v <= *u)
    }

    /// `|x - P(x - g)|_inf`, zero exactly at first-order stationary points.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..x.len() {
            let p = (x[i] - g[i]).max(self.lower[i]).min(self.upper[i]);
            worst = worst.max((x[i] - p).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Projected Adam: a standard bias-corrected Adam step followed by projection
/// onto the bounds. Returns the final iterate and its value.
pub fn adam<F: Differentiable>(
    f: &mut F,
    x0: &[f64],
    bounds: &Bounds,
    config: &AdamConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = alloc::vec![0.0; n];
    let mut m = alloc::vec![0.0; n];
    let mut v = alloc::vec![0.0; n];
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for it in 0..config.iterations {
        let fx = f.eval(&x, &mut g);
        if !fx.is_finite() || g.iter().any(|gi| !gi.is_finite()) {
            return Err(Error::NonFiniteLoss {
                phase: "adam",
                iteration: it,
            });
        }
        b1t *= config.beta1;
        b2t *= config.beta2;
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1t);
            let v_hat = v[i] / (1.0 - b2t);
            x[i] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.eps);
        }
        bounds.project(&mut x);
    }
    let fx = f.eval(&x, &mut g);
    if !fx.is_finite() {
        return Err(Error::NonFiniteLoss {
            phase: "adam",
            iteration: config.iterations,
        });
    }
    Ok((x, fx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    pub history: usize,
    /// Stop once `|x - P(x - g)|_inf` falls below this.
    pub pg_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            history: 10,
            pg_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LbfgsStatus {
    /// Projected-gradient tolerance reached.
    Converged,
    /// Iteration cap reached.
    MaxIterations,
    /// No step along the projected steepest-descent path decreased the value.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Limited-memory BFGS on a box with an active-set projection scheme.
///
/// At each iteration, variables sitting on a bound whose gradient pushes
/// outward are frozen; the two-loop recursion runs on the remaining free
/// variables and the step is taken along the projected path `P(x + t d)`
/// with Armijo backtracking. When the quasi-Newton direction fails, memory is
/// cleared and a projected steepest-descent step is tried. Every evaluated
/// point lies inside the box and accepted values never increase.
pub fn lbfgsb<F: Differentiable>(
    f: &mut F,
    x0: &[f64],
    bounds: &Bounds,
    config: &LbfgsConfig,
) -> Result<LbfgsReport> {
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = alloc::vec![0.0; n];
    let mut fx = f.eval(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::NonFiniteLoss {
            phase: "lbfgsb",
            iteration: 0,
        });
    }
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(config.history);
    let mut free = alloc::vec![true; n];
    let mut d = alloc::vec![0.0; n];
    let mut x_new = alloc::vec![0.0; n];
    let mut g_new = alloc::vec![0.0; n];

    for it in 0..config.max_iterations {
        if bounds.projected_gradient_norm(&x, &g) <= config.pg_tol {
            return Ok(LbfgsReport {
                x,
                value: fx,
                iterations: it,
                evaluations,
                status: LbfgsStatus::Converged,
            });
        }
        for i in 0..n {
            let at_lower = x[i] <= bounds.lower[i] && g[i] > 0.0;
            let at_upper = x[i] >= bounds.upper[i] && g[i] < 0.0;
            free[i] = !(at_lower || at_upper);
        }

        let mut accepted = false;
        // First try the quasi-Newton direction, then steepest descent with a fresh memory.
        for attempt in 0..2 {
            if attempt == 1 {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
            }
            let quasi_newton = !memory.is_empty();
            if quasi_newton {
                two_loop(&memory, &g, &free, &mut d);
            } else {
                let gnorm = free
                    .iter()
                    .zip(&g)
                    .filter(|(f, _)| **f)
                    .map(|(_, gi)| gi * gi)
                    .sum::<f64>();
                let scale = 1.0 / libm::sqrt(gnorm).max(1.0);
                for i in 0..n {
                    d[i] = if free[i] { -g[i] * scale } else { 0.0 };
                }
            }
            let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                for i in 0..n {
                    x_new[i] = x[i] + t * d[i];
                }
                bounds.project(&mut x_new);
                let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
                if decrease >= 0.0 {
                    t *= 0.5;
                    continue;
                }
                let f_new = f.eval(&x_new, &mut g_new);
                evaluations += 1;
                if !f_new.is_finite() {
                    t *= 0.5;
                    continue;
                }
                if f_new <= fx + ARMIJO_C1 * decrease {
                    let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                    let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let yy: f64 = y.iter().map(|v| v * v).sum();
                    if sy > 1e-10 * yy && sy > 0.0 {
                        if memory.len() == config.history {
                            memory.pop_front();
                        }
                        memory.push_back(Pair { s, y });
                    }
                    core::mem::swap(&mut x, &mut x_new);
                    core::mem::swap(&mut g, &mut g_new);
                    fx = f_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Ok(LbfgsReport {
                x,
                value: fx,
                iterations: it,
                evaluations,
                status: LbfgsStatus::LineSearchStalled,
            });
        }
    }
    let status = if bounds.projected_gradient_norm(&x, &g) <= config.pg_tol {
        LbfgsStatus::Converged
    } else {
        LbfgsStatus::MaxIterations
    };
    Ok(LbfgsReport {
        x,
        value: fx,
        iterations: config.max_iterations,
        evaluations,
        status,
    })
}

/// `d = -H g` restricted to free variables, with the usual `s'y / y'y` scaling.
fn two_loop(memory: &VecDeque<Pair>, g: &[f64], free: &[bool], d: &mut [f64]) {
    let n = g.len();
    let masked_dot = |a: &[f64], b: &[f64]| -> f64 {
        (0..n).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum()
    };
    for i in 0..n {
        d[i] = if free[i] { -g[i] } else { 0.0 };
    }
    let mut alpha = Vec::with_capacity(memory.len());
    let mut usable = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let sy = masked_dot(&pair.s, &pair.y);
        if sy <= 1e-12 * libm::sqrt(masked_dot(&pair.y, &pair.y) * masked_dot(&pair.s, &pair.s)) || sy <= 0.0 {
            alpha.push(0.0);
            usable.push(false);
            continue;
        }
        let rho = 1.0 / sy;
        let a = rho * masked_dot(&pair.s, d);
        for i in 0..n {
            if free[i] {
                d[i] -= a * pair.y[i];
            }
        }
        alpha.push(a);
        usable.push(true);
    }
    // Initial Hessian scaling from the newest usable pair.
    let gamma = memory
        .iter()
        .rev()
        .zip(&usable)
        .find(|(_, u)| **u)
        .map(|(p, _)| masked_dot(&p.s, &p.y) / masked_dot(&p.y, &p.y))
        .unwrap_or(1.0);
    for v in d.iter_mut() {
        *v *= gamma;
    }
    for (k, pair) in memory.iter().enumerate() {
        let idx = memory.len() - 1 - k;
        if !usable[idx] {
            continue;
        }
        let rho = 1.0 / masked_dot(&pair.s, &pair.y);
        let b = rho * masked_dot(&pair.y, d);
        for i in 0..n {
            if free[i] {
                d[i] += (alpha[idx] - b) * pair.s[i];
            }
        }
    }
}
