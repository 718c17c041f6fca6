//! Continuously tempered Hamiltonian Monte Carlo.
//!
//! A target `exp(-φ(x))/Z` is bridged to a normalised base `exp(-ψ(x))`
//! through an inverse temperature `β ∈ [0, 1]` that is sampled jointly with
//! `x`. Samples at every temperature contribute, via closed-form importance
//! weights, to estimates of `log Z` and of target and base expectations.

pub mod basefit;
pub mod error;
pub mod estimators;
pub mod integrate;
pub mod math;
pub mod model;
pub mod quadrature;
pub mod samplers;
pub mod tempering;

pub use error::{Error, Result};
