//! Experiment runners and the `ctmc` command line built on the `ctmc` crate.

pub mod bimodal;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod pool;
pub mod relaxation;

pub use error::{BenchError, Result};
