//! Preference learner: a quadratic score parameterized by Cholesky factors,
//! a sigmoid pairwise preference model and its regularized cross-entropy
//! training.

mod objective;
pub mod optim;
mod theta;
mod train;

pub use objective::{
    cross_entropy, loss, loss_gradient, pref_prob, predict, prob_from_score_difference, score,
    sigmoid, softplus, surrogate_pref, Objective, PROB_CLAMP,
};
pub use optim::LbfgsStatus;
pub use theta::{
    lower_bounds, theta_dim, theta_to_matrices, Theta, DIAG_LOWER_BOUND, FIRST_DIAG_LOWER_BOUND,
};
pub use train::{select_best, train, train_multistart, train_restarts, InitSampler, RandomInit, TrainConfig, TrainedModel};
