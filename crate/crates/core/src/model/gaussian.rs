use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{BaseDensity, Potential};
use crate::error::{check_dim, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal density with a cached Cholesky factor. Usable both as
/// a normalised base and as a target whose normaliser is exactly one.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Domain("Gaussian dimension must be positive".into()));
        }
        check_dim(d, covariance.nrows())?;
        check_dim(d, covariance.ncols())?;
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Domain(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(Self {
            mean: DVector::from_vec(mean),
            chol: chol.l(),
            covariance,
            precision,
            log_det,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::from_diagonal_element(d, d, variance))
    }

    pub fn standard(dim: usize) -> Self {
        Self::isotropic(vec![0.0; dim], 1.0).expect("identity covariance is SPD")
    }

    pub fn mean_vector(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance_matrix(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn quad_and_grad(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.mean.len();
        debug_assert_eq!(x.len(), d);
        let mut quad = 0.0;
        for i in 0..d {
            let mut gi = 0.0;
            for j in 0..d {
                gi += self.precision[(i, j)] * (x[j] - self.mean[j]);
            }
            quad += gi * (x[i] - self.mean[i]);
            if let Some(g) = grad.as_deref_mut() {
                g[i] = gi;
            }
        }
        0.5 * quad + 0.5 * self.log_det + 0.5 * d as f64 * LN_2PI
    }
}

impl BaseDensity for GaussianDensity {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn neg_log_pdf(&self, x: &[f64]) -> f64 {
        self.quad_and_grad(x, None)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.quad_and_grad(x, Some(grad));
    }

    fn neg_log_pdf_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.quad_and_grad(x, Some(grad))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }

    fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    fn covariance(&self) -> DMatrix<f64> {
        self.covariance.clone()
    }
}

impl Potential for GaussianDensity {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.quad_and_grad(x, None)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.quad_and_grad(x, Some(grad));
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.quad_and_grad(x, Some(grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalised_in_one_dimension() {
        let g = GaussianDensity::isotropic(vec![0.7], 2.3).unwrap();
        let z = crate::quadrature::integrate(|x| (-g.neg_log_pdf(&[x])).exp(), -30.0, 30.0, 1e-12).unwrap();
        assert!((z - 1.0).abs() < 1e-10);
    }

    #[test]
    fn standard_normal_at_origin() {
        let g = GaussianDensity::standard(2);
        assert!((g.neg_log_pdf(&[0.0, 0.0]) - LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianDensity::new(vec![0.0, 0.0], bad), Err(Error::Numerical(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(GaussianDensity::new(vec![0.0, 0.0], asym), Err(Error::Domain(_))));
    }

    #[test]
    fn sampler_moments_converge() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let g = GaussianDensity::new(vec![1.0, -2.0], cov.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut m = [0.0; 2];
        let mut s = [[0.0; 2]; 2];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            for i in 0..2 {
                m[i] += x[i];
                for j in 0..2 {
                    s[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..2 {
            m[i] /= n as f64;
        }
        assert!((m[0] - 1.0).abs() < 0.02 && (m[1] + 2.0).abs() < 0.01);
        for i in 0..2 {
            for j in 0..2 {
                let c = s[i][j] / n as f64 - m[i] * m[j];
                assert!((c - cov[(i, j)]).abs() < 0.03, "cov[{i}{j}] = {c}");
            }
        }
    }
}
