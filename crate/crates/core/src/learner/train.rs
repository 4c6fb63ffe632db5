use alloc::string::ToString;
use alloc::vec::Vec;

use crate::dataset::{PreferenceDataset, WeightSampling};
use crate::error::{check_dim, invalid, Error, Result};
use crate::oracle::accuracy;
use crate::rng;

use super::objective::{predict, Objective, PROB_CLAMP};
use super::optim::{adam, lbfgsb, AdamConfig, Bounds, LbfgsConfig, LbfgsStatus};
use super::theta::{lower_bounds, Theta};

/// Solver settings for one training run and the multistart wrapper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_history: usize,
    /// Weight of the `|theta|^2` regularizer.
    pub rho: f64,
    pub restarts: usize,
    pub prob_clamp: f64,
    /// Projected-gradient tolerance of the quasi-Newton phase.
    pub pg_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam_iters: 200,
            adam_lr: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            lbfgs_max_iters: 1000,
            lbfgs_history: 10,
            rho: 1e-6,
            restarts: 20,
            prob_clamp: PROB_CLAMP,
            pg_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("adam_lr", self.adam_lr),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("pg_tol", self.pg_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(alloc::format!("{name} must be positive")));
            }
        }
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(invalid("Adam decay rates must be below 1"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho must be non-negative"));
        }
        if self.lbfgs_history == 0 || self.restarts == 0 {
            return Err(invalid("history and restarts must be positive"));
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return Err(invalid("prob_clamp must lie in (0, 0.5)"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            iterations: self.adam_iters,
            learning_rate: self.adam_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            ..AdamConfig::default()
        }
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: self.lbfgs_max_iters,
            history: self.lbfgs_history,
            pg_tol: self.pg_tol,
        }
    }
}

/// A trained surrogate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub theta: Theta,
    pub train_accuracy: f64,
    /// Accuracy on the selection/test set, when one was supplied.
    pub test_accuracy: Option<f64>,
    /// Loss after the Adam phase.
    pub warm_start_loss: f64,
    pub final_loss: f64,
    pub lbfgs_iterations: usize,
    pub lbfgs_status: LbfgsStatus,
    /// Seconds spent in [`train`]; zero without the `std` feature.
    pub wall_time: f64,
    pub restart_index: usize,
    pub seed: u64,
}

#[cfg(feature = "std")]
struct Stopwatch(std::time::Instant);

#[cfg(feature = "std")]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(not(feature = "std"))]
struct Stopwatch;

#[cfg(not(feature = "std"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }
    fn elapsed(&self) -> f64 {
        0.0
    }
}

/// Projected Adam warm start followed by the bound-constrained quasi-Newton phase.
///
/// `theta_init` is projected onto the bounds first. The returned parameters
/// are feasible and their loss never exceeds the loss after the Adam phase.
pub fn train(dataset: &PreferenceDataset, config: &TrainConfig, theta_init: &Theta) -> Result<TrainedModel> {
    config.validate()?;
    let watch = Stopwatch::start();
    let objective = Objective::new(dataset, config.rho, config.prob_clamp)?;
    check_dim("theta length", objective.dim(), theta_init.as_slice().len())?;
    let (nx, nu) = (theta_init.nx(), theta_init.nu());
    let bounds = Bounds::lower_only(lower_bounds(nx, nu));
    let mut f = |x: &[f64], g: &mut [f64]| objective.value_and_gradient(x, g);

    let (warm, warm_loss) = adam(&mut f, theta_init.as_slice(), &bounds, &config.adam())?;
    let report = lbfgsb(&mut f, &warm, &bounds, &config.lbfgs())?;
    let (x, final_loss) = if report.value <= warm_loss {
        (report.x, report.value)
    } else {
        (warm, warm_loss)
    };
    let theta = Theta::new(nx, nu, x)?;
    let train_accuracy = accuracy(&predict(&theta, dataset)?, &dataset.labels())?;
    Ok(TrainedModel {
        theta,
        train_accuracy,
        test_accuracy: None,
        warm_start_loss: warm_loss,
        final_loss,
        lbfgs_iterations: report.iterations,
        lbfgs_status: report.status,
        wall_time: watch.elapsed(),
        restart_index: 0,
        seed: 0,
    })
}

/// Source of initial parameters, one per restart.
pub trait InitSampler {
    fn sample(&self, restart: usize) -> Result<Theta>;
    fn seed(&self) -> u64;
}

/// Draws random weights the same way the dataset's LQR weights are drawn,
/// factors them, and rescales so the leading factor entry meets its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInit {
    pub weights: WeightSampling,
    pub nx: usize,
    pub nu: usize,
    pub seed: u64,
}

impl InitSampler for RandomInit {
    fn sample(&self, restart: usize) -> Result<Theta> {
        let mut rng = rng::stream(self.seed, rng::domain::INIT, restart as u64);
        let (q, r) = self.weights.sample(&mut rng, self.nx, self.nu)?;
        Ok(Theta::from_matrices(&q, &r)?.normalized())
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

fn run_restart<S: InitSampler + ?Sized>(
    train_set: &PreferenceDataset,
    test_set: &PreferenceDataset,
    config: &TrainConfig,
    sampler: &S,
    restart: usize,
) -> Result<TrainedModel> {
    let init = sampler.sample(restart)?;
    let mut model = train(train_set, config, &init)?;
    model.test_accuracy = Some(accuracy(&predict(&model.theta, test_set)?, &test_set.labels())?);
    model.restart_index = restart;
    model.seed = sampler.seed();
    Ok(model)
}

/// `config.restarts` trainings from independent initializations; keeps the
/// model with the best test accuracy, then the lowest final loss, then the
/// lowest restart index. Failed restarts are skipped.
pub fn train_multistart<S: InitSampler + Sync + ?Sized>(
    train_set: &PreferenceDataset,
    test_set: &PreferenceDataset,
    config: &TrainConfig,
    sampler: &S,
) -> Result<TrainedModel> {
    config.validate()?;
    if test_set.is_empty() {
        return Err(invalid("model selection needs a non-empty test set"));
    }
    select_best(train_restarts(train_set, test_set, config, sampler))
}

/// Every restart of [`train_multistart`], in restart order.
#[cfg(feature = "parallel")]
pub fn train_restarts<S: InitSampler + Sync + ?Sized>(
    train_set: &PreferenceDataset,
    test_set: &PreferenceDataset,
    config: &TrainConfig,
    sampler: &S,
) -> Vec<Result<TrainedModel>> {
    use rayon::prelude::*;
    (0..config.restarts)
        .into_par_iter()
        .map(|k| run_restart(train_set, test_set, config, sampler, k))
        .collect()
}

/// Every restart of [`train_multistart`], in restart order.
#[cfg(not(feature = "parallel"))]
pub fn train_restarts<S: InitSampler + Sync + ?Sized>(
    train_set: &PreferenceDataset,
    test_set: &PreferenceDataset,
    config: &TrainConfig,
    sampler: &S,
) -> Vec<Result<TrainedModel>> {
    (0..config.restarts)
        .map(|k| run_restart(train_set, test_set, config, sampler, k))
        .collect()
}

/// Deterministic reduction over restart results, independent of their order.
pub fn select_best(results: Vec<Result<TrainedModel>>) -> Result<TrainedModel> {
    let restarts = results.len();
    let mut best: Option<TrainedModel> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(m) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (ma, ba) = (m.test_accuracy.unwrap_or(0.0), b.test_accuracy.unwrap_or(0.0));
                        ma > ba
                            || (ma == ba && m.final_loss < b.final_loss)
                            || (ma == ba && m.final_loss == b.final_loss && m.restart_index < b.restart_index)
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| Error::AllRestartsFailed {
        restarts,
        last: last_err.map(|e| e.to_string()).unwrap_or_default(),
    })
}
