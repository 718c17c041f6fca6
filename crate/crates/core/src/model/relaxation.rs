use nalgebra::DMatrix;

use super::{BmOracle, BoltzmannMachine, Potential};
use crate::error::{check_dim, Error, Result};
use crate::math::log_cosh;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_2: f64 = std::f64::consts::LN_2;

/// Relative eigenvalue cut-off when factorising `W + D`.
const RANK_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Continuous Gaussian-mixture relaxation of a Boltzmann machine:
/// `φ(x) = ½xᵀx − Σ_i log cosh(q_iᵀx + b_i)` with `QQᵀ = W + diag(shift)`.
#[derive(Debug, Clone)]
pub struct RelaxationModel {
    q: DMatrix<f64>,
    q_rows: Vec<f64>,
    biases: Vec<f64>,
    diag_shift: Vec<f64>,
    source: BoltzmannMachine,
}

/// Exact normaliser and moments of a relaxation.
#[derive(Debug, Clone)]
pub struct RelaxationMoments {
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl RelaxationModel {
    /// Assembles a relaxation from an explicit factor, checking
    /// `QQᵀ = W + diag(shift)` entrywise to 1e-8.
    pub fn new(q: DMatrix<f64>, diag_shift: Vec<f64>, source: BoltzmannMachine) -> Result<Self> {
        let n = source.n_units();
        check_dim(n, q.nrows())?;
        check_dim(n, diag_shift.len())?;
        if q.ncols() == 0 {
            return Err(Error::Domain("relaxation needs at least one continuous dimension".into()));
        }
        let target = source.weights() + DMatrix::from_diagonal(&diag_shift.clone().into());
        let err = (&q * q.transpose() - target).abs().max();
        if err > RECONSTRUCTION_TOL {
            return Err(Error::Numerical(format!("QQᵀ differs from W + D by {err:e}")));
        }
        let d = q.ncols();
        let q_rows = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| q[(i, j)]).collect();
        let biases = source.biases().iter().copied().collect();
        Ok(Self { q, q_rows, biases, diag_shift, source })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn diag_shift(&self) -> &[f64] {
        &self.diag_shift
    }

    pub fn source(&self) -> &BoltzmannMachine {
        &self.source
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn n_units(&self) -> usize {
        self.biases.len()
    }

    /// Pre-activations `a_i = q_iᵀx + b_i`.
    fn activations(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for (i, a) in out.iter_mut().enumerate() {
            let row = &self.q_rows[i * d..(i + 1) * d];
            *a = self.biases[i] + row.iter().zip(x).map(|(q, x)| q * x).sum::<f64>();
        }
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = x.len();
        debug_assert_eq!(d, self.q.ncols());
        let mut act = vec![0.0; self.n_units()];
        self.activations(x, &mut act);
        let mut value = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        value -= act.iter().map(|&a| log_cosh(a)).sum::<f64>();
        if let Some(g) = grad {
            g.copy_from_slice(x);
            for (i, &a) in act.iter().enumerate() {
                let t = a.tanh();
                let row = &self.q_rows[i * d..(i + 1) * d];
                for (gj, qj) in g.iter_mut().zip(row) {
                    *gj -= t * qj;
                }
            }
        }
        value
    }
}

impl Potential for RelaxationModel {
    fn dim(&self) -> usize {
        self.q.ncols()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.eval(x, Some(grad));
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

/// Builds the relaxation with the uniform shift `D = (eps − λ_min(W))·I`,
/// factorising `W + D = VΛVᵀ` and keeping eigenvalues above `1e-10·λ_max`.
pub fn relaxation_from_bm(bm: &BoltzmannMachine, eps: f64) -> Result<RelaxationModel> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("shift margin must be positive, got {eps}")));
    }
    let n = bm.n_units();
    let w = bm.weights().clone();
    let lambda_min = w
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        return Err(Error::Numerical("eigendecomposition of W failed".into()));
    }
    let shift = eps - lambda_min;
    let shifted = &w + DMatrix::from_diagonal_element(n, n, shift);
    let eig = shifted.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lambda_max.is_finite() || lambda_max <= 0.0 {
        return Err(Error::Numerical("eigendecomposition of W + D failed".into()));
    }
    let mut order: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > RANK_TOL * lambda_max).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let q = DMatrix::from_fn(n, order.len(), |i, c| {
        let k = order[c];
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
    });
    RelaxationModel::new(q, vec![shift; n], bm.clone())
}

/// Exact `log Z`, mean and covariance of the relaxation from the Boltzmann
/// machine moments: `E[x] = QᵀE[s]`, `E[xxᵀ] = QᵀE[ssᵀ]Q + I`.
pub fn relaxation_true_moments(model: &RelaxationModel, oracle: &BmOracle) -> Result<RelaxationMoments> {
    let n = model.n_units();
    check_dim(n, oracle.mean_s.len())?;
    check_dim(n, oracle.second_moment_s.nrows())?;
    let d = model.q.ncols();
    let q = &model.q;
    let ms = nalgebra::DVector::from_column_slice(&oracle.mean_s);
    let mean = q.transpose() * &ms;
    let cov = q.transpose() * &oracle.second_moment_s * q + DMatrix::<f64>::identity(d, d) - &mean * mean.transpose();
    let trace_d: f64 = model.diag_shift.iter().sum();
    let log_z = oracle.log_z_b + 0.5 * trace_d + 0.5 * d as f64 * LN_2PI - n as f64 * LN_2;
    Ok(RelaxationMoments { log_z, mean: mean.iter().copied().collect(), cov })
}
