use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    matrix_to_rows, rows_to_matrix, BaseDensity, BoltzmannMachine, GaussianDensity, GaussianMixtureModel, Potential,
    RelaxationModel,
};
use crate::error::{Error, Result};

/// JSON form of every built-in family. Matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelDoc {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    },
    BoltzmannMachine {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    Relaxation {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        q: Vec<Vec<f64>>,
        diag_shift: Vec<f64>,
    },
}

/// A built-in family ready for evaluation.
#[derive(Debug, Clone)]
pub enum Model {
    Gaussian(GaussianDensity),
    Mixture(GaussianMixtureModel),
    Relaxation(RelaxationModel),
}

impl ModelDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("invalid model document: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialise")
    }

    pub fn boltzmann_machine(&self) -> Result<BoltzmannMachine> {
        match self {
            Self::BoltzmannMachine { weights, biases } | Self::Relaxation { weights, biases, .. } => {
                BoltzmannMachine::new(rows_to_matrix(weights)?, biases.clone())
            }
            _ => Err(Error::Usage("document does not describe a Boltzmann machine".into())),
        }
    }

    pub fn into_model(&self) -> Result<Model> {
        Ok(match self {
            Self::Gaussian { mean, covariance } => Model::Gaussian(GaussianDensity::new(mean.clone(), rows_to_matrix(covariance)?)?),
            Self::GaussianMixture { weights, means, covariances } => {
                if means.len() != covariances.len() {
                    return Err(Error::DimensionMismatch { expected: means.len(), found: covariances.len() });
                }
                let components = means
                    .iter()
                    .zip(covariances)
                    .map(|(m, c)| GaussianDensity::new(m.clone(), rows_to_matrix(c)?))
                    .collect::<Result<Vec<_>>>()?;
                Model::Mixture(GaussianMixtureModel::new(weights.clone(), components)?)
            }
            Self::Relaxation { q, diag_shift, .. } => {
                Model::Relaxation(RelaxationModel::new(rows_to_matrix(q)?, diag_shift.clone(), self.boltzmann_machine()?)?)
            }
            Self::BoltzmannMachine { .. } => {
                return Err(Error::Usage("a Boltzmann machine is discrete; relax it before sampling".into()))
            }
        })
    }
}

impl From<&GaussianDensity> for ModelDoc {
    fn from(g: &GaussianDensity) -> Self {
        Self::Gaussian { mean: g.mean_vector().iter().copied().collect(), covariance: matrix_to_rows(g.covariance_matrix()) }
    }
}

impl From<&GaussianMixtureModel> for ModelDoc {
    fn from(m: &GaussianMixtureModel) -> Self {
        Self::GaussianMixture {
            weights: m.weights().to_vec(),
            means: m.components().iter().map(|c| c.mean_vector().iter().copied().collect()).collect(),
            covariances: m.components().iter().map(|c| matrix_to_rows(c.covariance_matrix())).collect(),
        }
    }
}

impl From<&BoltzmannMachine> for ModelDoc {
    fn from(bm: &BoltzmannMachine) -> Self {
        Self::BoltzmannMachine { weights: matrix_to_rows(bm.weights()), biases: bm.biases().iter().copied().collect() }
    }
}

impl From<&RelaxationModel> for ModelDoc {
    fn from(r: &RelaxationModel) -> Self {
        Self::Relaxation {
            weights: matrix_to_rows(r.source().weights()),
            biases: r.biases().to_vec(),
            q: matrix_to_rows(r.q()),
            diag_shift: r.diag_shift().to_vec(),
        }
    }
}

impl From<&Model> for ModelDoc {
    fn from(m: &Model) -> Self {
        match m {
            Model::Gaussian(g) => g.into(),
            Model::Mixture(g) => g.into(),
            Model::Relaxation(r) => r.into(),
        }
    }
}

impl Model {
    /// The normalised families, usable as a base density.
    pub fn as_base(&self) -> Option<&dyn BaseDensity> {
        match self {
            Model::Gaussian(g) => Some(g),
            Model::Mixture(m) => Some(m),
            Model::Relaxation(_) => None,
        }
    }

    pub fn into_base(self) -> Result<Base> {
        match self {
            Model::Gaussian(g) => Ok(Base::Gaussian(g)),
            Model::Mixture(m) => Ok(Base::Mixture(m)),
            Model::Relaxation(_) => Err(Error::Usage("a relaxation has no exact sampler and cannot be a base".into())),
        }
    }
}

impl Potential for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Gaussian(g) => Potential::dim(g),
            Model::Mixture(m) => Potential::dim(m),
            Model::Relaxation(r) => r.dim(),
        }
    }

    fn potential(&self, x: &[f64]) -> f64 {
        match self {
            Model::Gaussian(g) => g.potential(x),
            Model::Mixture(m) => m.potential(x),
            Model::Relaxation(r) => r.potential(x),
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self {
            Model::Gaussian(g) => Potential::gradient(g, x, grad),
            Model::Mixture(m) => Potential::gradient(m, x, grad),
            Model::Relaxation(r) => r.gradient(x, grad),
        }
    }

    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Model::Gaussian(g) => g.potential_and_gradient(x, grad),
            Model::Mixture(m) => m.potential_and_gradient(x, grad),
            Model::Relaxation(r) => r.potential_and_gradient(x, grad),
        }
    }
}

/// A normalised built-in family.
#[derive(Debug, Clone)]
pub enum Base {
    Gaussian(GaussianDensity),
    Mixture(GaussianMixtureModel),
}

impl Base {
    fn inner(&self) -> &dyn BaseDensity {
        match self {
            Base::Gaussian(g) => g,
            Base::Mixture(m) => m,
        }
    }
}

impl From<&Base> for ModelDoc {
    fn from(b: &Base) -> Self {
        match b {
            Base::Gaussian(g) => g.into(),
            Base::Mixture(m) => m.into(),
        }
    }
}

impl BaseDensity for Base {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn neg_log_pdf(&self, x: &[f64]) -> f64 {
        self.inner().neg_log_pdf(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner().gradient(x, grad)
    }

    fn neg_log_pdf_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner().neg_log_pdf_and_gradient(x, grad)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner().sample(rng)
    }

    fn mean(&self) -> Vec<f64> {
        self.inner().mean()
    }

    fn covariance(&self) -> DMatrix<f64> {
        self.inner().covariance()
    }
}
