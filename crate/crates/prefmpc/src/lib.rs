//! File formats, experiment runner, command-line interface and HTTP service
//! around the `prefmpc-core` numerics.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod server;
pub mod simulation;
pub mod table;

pub use error::{Error, Result};
pub use prefmpc_core as core;
