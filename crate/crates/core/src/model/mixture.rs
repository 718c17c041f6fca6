use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{BaseDensity, GaussianDensity, Potential};
use crate::error::{check_dim, Error, Result};
use crate::math::LogAccumulator;

/// Finite Gaussian mixture. As a target its normalising constant is exactly one.
#[derive(Debug, Clone)]
pub struct GaussianMixtureModel {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<GaussianDensity>,
}

impl GaussianMixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianDensity>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        check_dim(weights.len(), components.len())?;
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mixture weights sum to {total}, not 1")));
        }
        let d = components[0].mean_vector().len();
        for c in &components {
            check_dim(d, c.mean_vector().len())?;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { weights, log_weights, components })
    }

    /// Mixture with axis-aligned components given by per-coordinate variances.
    pub fn diagonal(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(means.len(), variances.len())?;
        let components = means
            .into_iter()
            .zip(variances)
            .map(|(m, v)| {
                check_dim(m.len(), v.len())?;
                GaussianDensity::new(m, DMatrix::from_diagonal(&v.into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights, components)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianDensity] {
        &self.components
    }

    /// Posterior component probabilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw - c.neg_log_pdf(x))
            .collect();
        let lse = crate::math::log_sum_exp(&logs);
        logs.iter().map(|l| (l - lse).exp()).collect()
    }

    fn value_and_grad(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = x.len();
        let k = self.components.len();
        let mut logs = Vec::with_capacity(k);
        let mut grads = Vec::with_capacity(if grad.is_some() { k } else { 0 });
        for (c, lw) in self.components.iter().zip(&self.log_weights) {
            if grad.is_some() {
                let mut g = vec![0.0; d];
                logs.push(lw - c.neg_log_pdf_and_gradient(x, &mut g));
                grads.push(g);
            } else {
                logs.push(lw - c.neg_log_pdf(x));
            }
        }
        let mut acc = LogAccumulator::new();
        for &l in &logs {
            acc.push(l);
        }
        let lse = acc.log_sum();
        if let Some(out) = grad {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (l, g) in logs.iter().zip(&grads) {
                let r = (l - lse).exp();
                for i in 0..d {
                    out[i] += r * g[i];
                }
            }
        }
        -lse
    }
}

impl Potential for GaussianMixtureModel {
    fn dim(&self) -> usize {
        self.components[0].mean_vector().len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.value_and_grad(x, None)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_grad(x, Some(grad));
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.value_and_grad(x, Some(grad))
    }
}

impl BaseDensity for GaussianMixtureModel {
    fn dim(&self) -> usize {
        Potential::dim(self)
    }

    fn neg_log_pdf(&self, x: &[f64]) -> f64 {
        self.value_and_grad(x, None)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_grad(x, Some(grad));
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut idx = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                idx = k;
                break;
            }
        }
        self.components[idx].sample(rng)
    }

    fn mean(&self) -> Vec<f64> {
        let d = Potential::dim(self);
        let mut m = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                m[i] += w * c.mean_vector()[i];
            }
        }
        m
    }

    fn covariance(&self) -> DMatrix<f64> {
        let d = Potential::dim(self);
        let m = nalgebra::DVector::from_vec(BaseDensity::mean(self));
        let mut cov = DMatrix::zeros(d, d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let mu = c.mean_vector();
            cov += (c.covariance_matrix() + mu * mu.transpose()) * *w;
        }
        cov - &m * m.transpose()
    }
}
