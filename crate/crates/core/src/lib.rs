//! Learning quadratic MPC objectives from pairwise trajectory preferences.
//!
//! The crate is `no_std` (with `alloc`). It covers the whole numerical
//! pipeline: linear plant models and LQR synthesis ([`linsys`]), trajectory
//! metrics ([`trajectory`]), synthetic preference oracles ([`oracle`]),
//! dataset generation ([`dataset`]), the preference learner ([`learner`]) and
//! a box-constrained MPC controller with campaign evaluation ([`mpc`]).
//!
//! Enable the `std` feature to record wall-clock training times and
//! `parallel` to spread restarts and simulations over a rayon pool.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(non_snake_case)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod learner;
pub mod linalg;
pub mod linsys;
pub mod mpc;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use linsys::LinearSystem;
pub use oracle::{Preference, PreferenceOracle};
pub use trajectory::{SettlingResult, Trajectory};
