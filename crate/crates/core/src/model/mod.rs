//! Differentiable targets, normalised base densities and the built-in model
//! families.

mod boltzmann;
mod doc;
mod gaussian;
mod mixture;
mod relaxation;

pub use boltzmann::{
    bm_exhaustive_oracle, generate_bm_params, random_orthogonal, BmOracle, BoltzmannMachine,
    MAX_ENUMERATION_UNITS,
};
pub use doc::{Base, Model, ModelDoc};
pub use gaussian::GaussianDensity;
pub use mixture::GaussianMixtureModel;
pub use relaxation::{relaxation_from_bm, relaxation_true_moments, RelaxationModel, RelaxationMoments};

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{check_dim, Result};

/// Unnormalised target `exp(-φ(x)) / Z`, described by its potential energy `φ`.
///
/// Implementations may assume `x.len() == self.dim()`; the `try_*` methods
/// check that contract first.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, x: &[f64]) -> f64;

    /// Writes `∇φ(x)` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// `φ(x)` and `∇φ(x)` together; override when the two share work.
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.potential(x)
    }

    fn try_potential(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.potential(x))
    }

    fn try_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        Ok(g)
    }
}

/// Normalised density `exp(-ψ(x))` that can be sampled exactly and has known
/// first and second moments.
pub trait BaseDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// `ψ(x)`, including every normalising constant.
    fn neg_log_pdf(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    fn neg_log_pdf_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.neg_log_pdf(x)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn mean(&self) -> Vec<f64>;

    fn covariance(&self) -> DMatrix<f64>;
}

macro_rules! forward_potential {
    ($($wrapper:ty),*) => {$(
        impl<T: Potential + ?Sized> Potential for $wrapper {
            fn dim(&self) -> usize { (**self).dim() }
            fn potential(&self, x: &[f64]) -> f64 { (**self).potential(x) }
            fn gradient(&self, x: &[f64], grad: &mut [f64]) { (**self).gradient(x, grad) }
            fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
                (**self).potential_and_gradient(x, grad)
            }
        }
    )*};
}

macro_rules! forward_base {
    ($($wrapper:ty),*) => {$(
        impl<T: BaseDensity + ?Sized> BaseDensity for $wrapper {
            fn dim(&self) -> usize { (**self).dim() }
            fn neg_log_pdf(&self, x: &[f64]) -> f64 { (**self).neg_log_pdf(x) }
            fn gradient(&self, x: &[f64], grad: &mut [f64]) { (**self).gradient(x, grad) }
            fn neg_log_pdf_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
                (**self).neg_log_pdf_and_gradient(x, grad)
            }
            fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> { (**self).sample(rng) }
            fn mean(&self) -> Vec<f64> { (**self).mean() }
            fn covariance(&self) -> DMatrix<f64> { (**self).covariance() }
        }
    )*};
}

forward_potential!(&T, Box<T>, Arc<T>);
forward_base!(&T, Box<T>, Arc<T>);

/// Plugs closures in as a target; the programmatic extension point for
/// potentials that are not one of the built-in families.
pub struct FnPotential<F, G> {
    dim: usize,
    potential: F,
    gradient: G,
}

impl<F, G> FnPotential<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, potential: F, gradient: G) -> Self {
        Self { dim, potential, gradient }
    }
}

impl<F, G> Potential for FnPotential<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> f64 {
        (self.potential)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
}

/// Row-major `Vec<Vec<f64>>` view of a matrix, the JSON layout used throughout.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        check_dim(ncols, r.len())?;
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
