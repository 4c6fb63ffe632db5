//! Sigmoid preference model and the regularized cross-entropy objective.

use alloc::vec::Vec;

use crate::dataset::PreferenceDataset;
use crate::error::{check_dim, invalid, Result};
use crate::linalg::packed_len;
use crate::oracle::Preference;
use crate::trajectory::{quad_cost, Trajectory};

use super::theta::Theta;

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// `phi_N(T; Q_theta, R_theta)`.
pub fn score(traj: &Trajectory, theta: &Theta) -> Result<f64> {
    let (q, r) = theta.matrices();
    quad_cost(traj, &q, &r)
}

/// Logistic function evaluated without overflow for any sign of `z`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Probability that `ti` is preferred: `1 / (1 + exp(d))` with `d` the score
/// difference, clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn prob_from_score_difference(d: f64) -> f64 {
    sigmoid(-d).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn pref_prob(ti: &Trajectory, tj: &Trajectory, theta: &Theta) -> Result<f64> {
    let (q, r) = theta.matrices();
    let d = quad_cost(ti, &q, &r)? - quad_cost(tj, &q, &r)?;
    Ok(prob_from_score_difference(d))
}

/// `First` iff `score(ti) <= score(tj)`.
pub fn surrogate_pref(ti: &Trajectory, tj: &Trajectory, theta: &Theta) -> Result<Preference> {
    let (q, r) = theta.matrices();
    Ok(Preference::first_if(quad_cost(ti, &q, &r)? <= quad_cost(tj, &q, &r)?))
}

/// Surrogate labels for every pair of `dataset` (each trajectory scored once).
pub fn predict(theta: &Theta, dataset: &PreferenceDataset) -> Result<Vec<Preference>> {
    let (q, r) = theta.matrices();
    let scores = dataset
        .pool()
        .trajectories()
        .iter()
        .map(|t| quad_cost(t, &q, &r))
        .collect::<Result<Vec<_>>>()?;
    Ok(dataset
        .pairs()
        .iter()
        .map(|p| Preference::first_if(scores[p.i] <= scores[p.j]))
        .collect())
}

/// Cross-entropy of label `p` against predicted probability `p_hat`.
pub fn cross_entropy(p: f64, p_hat: f64) -> f64 {
    let p_hat = p_hat.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -p * libm::log(p_hat) - (1.0 - p) * libm::log(1.0 - p_hat)
}

/// `rho |theta|^2 + mean cross-entropy`, evaluated directly from trajectory
/// scores. [`Objective`] computes the same quantity through per-pair
/// features and is what the optimizers use.
pub fn loss(theta: &Theta, dataset: &PreferenceDataset, rho: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(invalid("loss of an empty dataset"));
    }
    let (q, r) = theta.matrices();
    let scores = dataset
        .pool()
        .trajectories()
        .iter()
        .map(|t| quad_cost(t, &q, &r))
        .collect::<Result<Vec<_>>>()?;
    let mut data = 0.0;
    for pair in dataset.pairs() {
        let d = scores[pair.i] - scores[pair.j];
        // 1 - P(i, j) is evaluated as P(j, i) to keep precision near 1.
        let p_ij = prob_from_score_difference(d);
        let p_ji = prob_from_score_difference(-d);
        let p = pair.p.as_f64();
        data += -p * libm::log(p_ij) - (1.0 - p) * libm::log(p_ji);
    }
    let reg: f64 = theta.as_slice().iter().map(|v| v * v).sum();
    Ok(rho * reg + data / dataset.len() as f64)
}

/// Exact gradient of [`loss`] with respect to the packed factors.
pub fn loss_gradient(theta: &Theta, dataset: &PreferenceDataset, rho: f64) -> Result<Vec<f64>> {
    let objective = Objective::new(dataset, rho, PROB_CLAMP)?;
    check_dim("theta state dimension", objective.nx, theta.nx())?;
    let mut grad = alloc::vec![0.0; theta.as_slice().len()];
    objective.value_and_gradient(theta.as_slice(), &mut grad);
    Ok(grad)
}

/// The training objective compiled from a dataset.
///
/// The score is linear in the weights: `phi_N(T) = <Q, Sx(T)> + <R, Su(T)>`
/// with `Sx`, `Su` the Gram sums of states and inputs. Each pair therefore
/// reduces to the Gram differences `Dx = Sx(T_i) - Sx(T_j)` and `Du`, and
/// the score difference is `<Q, Dx> + <R, Du>`.
#[derive(Debug, Clone)]
pub struct Objective {
    nx: usize,
    nu: usize,
    /// Row-major `Dx` then `Du` for each pair.
    features: Vec<f64>,
    labels: Vec<bool>,
    rho: f64,
    lo: f64,
    hi: f64,
}

impl Objective {
    pub fn new(dataset: &PreferenceDataset, rho: f64, prob_clamp: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(invalid("loss of an empty dataset"));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(invalid("regularization weight must be non-negative"));
        }
        if !(prob_clamp > 0.0 && prob_clamp < 0.5) {
            return Err(invalid("probability clamp must lie in (0, 0.5)"));
        }
        let pool = dataset.pool();
        let nx = pool.state_dim();
        let nu = pool.input_dim();
        let grams: Vec<_> = pool.trajectories().iter().map(|t| t.gram()).collect();
        let width = nx * nx + nu * nu;
        let mut features = Vec::with_capacity(dataset.len() * width);
        for pair in dataset.pairs() {
            let (sxi, sui) = &grams[pair.i];
            let (sxj, suj) = &grams[pair.j];
            for a in 0..nx {
                for b in 0..nx {
                    features.push(sxi[(a, b)] - sxj[(a, b)]);
                }
            }
            for a in 0..nu {
                for b in 0..nu {
                    features.push(sui[(a, b)] - suj[(a, b)]);
                }
            }
        }
        Ok(Self {
            nx,
            nu,
            features,
            labels: dataset.pairs().iter().map(|p| p.p == Preference::First).collect(),
            rho,
            // Per-pair loss range implied by the probability clamp.
            lo: -libm::log1p(-prob_clamp),
            hi: -libm::log(prob_clamp),
        })
    }

    pub fn dim(&self) -> usize {
        packed_len(self.nx) + packed_len(self.nu)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Loss at `theta`; writes the gradient into `grad`.
    pub fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (nx, nu) = (self.nx, self.nu);
        let lq = lower_dense(&theta[..packed_len(nx)], nx);
        let lr = lower_dense(&theta[packed_len(nx)..], nu);
        let q = gram_of(&lq, nx);
        let r = gram_of(&lr, nu);
        let width = nx * nx + nu * nu;
        let mut weighted = alloc::vec![0.0; width];
        let mut data = 0.0;
        for (k, &first) in self.labels.iter().enumerate() {
            let f = &self.features[k * width..(k + 1) * width];
            let d = dot(&q, &f[..nx * nx]) + dot(&r, &f[nx * nx..]);
            // Loss is softplus(s) with s = d for label 1 and s = -d for label 0.
            let s = if first { d } else { -d };
            let raw = softplus(s);
            let (value, slope) = if raw <= self.lo {
                (self.lo, 0.0)
            } else if raw >= self.hi {
                (self.hi, 0.0)
            } else {
                (raw, sigmoid(s))
            };
            data += value;
            let g = if first { slope } else { -slope };
            if g != 0.0 {
                for (w, fv) in weighted.iter_mut().zip(f) {
                    *w += g * fv;
                }
            }
        }
        let n = self.labels.len() as f64;
        data /= n;
        for w in weighted.iter_mut() {
            *w /= n;
        }
        // d<L L', W>/dL = (W + W') L = 2 W L for symmetric W.
        let (wx, wu) = weighted.split_at(nx * nx);
        let (gq, gr) = grad.split_at_mut(packed_len(nx));
        factor_gradient(wx, &lq, nx, gq);
        factor_gradient(wu, &lr, nu, gr);
        let mut reg = 0.0;
        for (g, t) in grad.iter_mut().zip(theta) {
            *g += 2.0 * self.rho * t;
            reg += t * t;
        }
        self.rho * reg + data
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut scratch = alloc::vec![0.0; theta.len()];
        self.value_and_gradient(theta, &mut scratch)
    }
}

fn lower_dense(packed: &[f64], n: usize) -> Vec<f64> {
    let mut l = alloc::vec![0.0; n * n];
    let mut idx = 0;
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = packed[idx];
            idx += 1;
        }
    }
    l
}

fn gram_of(l: &[f64], n: usize) -> Vec<f64> {
    let mut m = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Packed lower triangle of `2 W L`.
fn factor_gradient(w: &[f64], l: &[f64], n: usize, out: &mut [f64]) {
    let mut idx = 0;
    for i in 0..n {
        for j in 0..=i {
            // L is lower triangular, so only k >= j contributes.
            let v: f64 = (j..n).map(|k| w[i * n + k] * l[k * n + j]).sum();
            out[idx] = 2.0 * v;
            idx += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!(softplus(1000.0).is_finite());
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(prob_from_score_difference(0.0), 0.5);
        let p = prob_from_score_difference(libm::log(3.0));
        assert!((p - 0.25).abs() < 1e-15);
        assert_eq!(prob_from_score_difference(1e6), PROB_CLAMP);
        assert_eq!(prob_from_score_difference(-1e6), 1.0 - PROB_CLAMP);
    }

    #[test]
    fn cross_entropy_examples() {
        assert!((cross_entropy(1.0, 0.5) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(1.0, 0.25) - libm::log(4.0)).abs() < 1e-15);
        let confident = cross_entropy(1.0, 1.0);
        // 1 - 1e-12 is not exactly representable; the bound holds to ~1e-4 relative.
        assert!(confident > 0.0 && confident <= 1.0001e-12);
        assert!(cross_entropy(0.0, 0.0) < 1.1e-12);
    }
}
