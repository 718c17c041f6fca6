use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::math::LogAccumulator;

/// Largest number of binary units the exhaustive oracle will enumerate.
pub const MAX_ENUMERATION_UNITS: usize = 20;

/// Boltzmann machine on signed binary states `s ∈ {-1, +1}^n` with
/// `P(s) ∝ exp(½ sᵀWs + bᵀs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannMachine {
    weights: DMatrix<f64>,
    biases: DVector<f64>,
}

impl BoltzmannMachine {
    /// `weights` must be exactly symmetric with a zero diagonal.
    pub fn new(weights: DMatrix<f64>, biases: Vec<f64>) -> Result<Self> {
        let n = biases.len();
        if n == 0 {
            return Err(Error::Domain("Boltzmann machine needs at least one unit".into()));
        }
        check_dim(n, weights.nrows())?;
        check_dim(n, weights.ncols())?;
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("weight diagonal entry {i} is non-zero")));
            }
            for j in 0..i {
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::Domain(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { weights, biases: DVector::from_vec(biases) })
    }

    pub fn n_units(&self) -> usize {
        self.biases.len()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &DVector<f64> {
        &self.biases
    }

    /// Unnormalised log-probability `½ sᵀWs + bᵀs`.
    pub fn log_weight(&self, s: &[f64]) -> f64 {
        let n = self.n_units();
        let mut e = 0.0;
        for i in 0..n {
            let mut field = 0.0;
            for j in 0..n {
                field += self.weights[(i, j)] * s[j];
            }
            e += s[i] * (0.5 * field + self.biases[i]);
        }
        e
    }
}

/// Exact log-partition function and spin moments of a Boltzmann machine.
#[derive(Debug, Clone, PartialEq)]
pub struct BmOracle {
    pub log_z_b: f64,
    pub mean_s: Vec<f64>,
    pub second_moment_s: DMatrix<f64>,
}

/// Walks all `2^n` states in Gray-code order, updating the energy in `O(n)`
/// per flip. Calls `visit(state, log_weight)` once per state.
fn gray_walk<F: FnMut(&[f64], f64)>(bm: &BoltzmannMachine, mut visit: F) {
    let n = bm.n_units();
    let w = &bm.weights;
    let b = &bm.biases;
    let mut s = vec![-1.0; n];
    // field[i] = Σ_j W_ij s_j
    let mut field: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| w[(i, j)]).sum::<f64>()).collect();
    let mut energy = bm.log_weight(&s);
    visit(&s, energy);
    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let old = s[k];
        energy -= 2.0 * old * (field[k] + b[k]);
        s[k] = -old;
        for i in 0..n {
            field[i] -= 2.0 * old * w[(i, k)];
        }
        visit(&s, energy);
    }
}

/// Exact `log Z_B`, `E[s]` and `E[ssᵀ]` by enumerating every state.
pub fn bm_exhaustive_oracle(bm: &BoltzmannMachine) -> Result<BmOracle> {
    let n = bm.n_units();
    if n > MAX_ENUMERATION_UNITS {
        return Err(Error::SizeLimit { dim: n, max: MAX_ENUMERATION_UNITS });
    }
    let mut acc = LogAccumulator::new();
    gray_walk(bm, |_, e| acc.push(e));
    let log_z_b = acc.log_sum();

    let mut mean = vec![0.0; n];
    let mut second = DMatrix::<f64>::zeros(n, n);
    gray_walk(bm, |s, e| {
        let p = (e - log_z_b).exp();
        for i in 0..n {
            let ps = p * s[i];
            mean[i] += ps;
            for j in (i + 1)..n {
                second[(i, j)] += ps * s[j];
            }
        }
    });
    for i in 0..n {
        second[(i, i)] = 1.0;
        for j in (i + 1)..n {
            second[(j, i)] = second[(i, j)];
        }
    }
    Ok(BmOracle { log_z_b, mean_s: mean, second_moment_s: second })
}

/// Haar-distributed orthogonal matrix: QR of an i.i.d. standard-normal
/// matrix, with columns sign-corrected so `R` has a positive diagonal.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        entries.push(rng.sample::<f64, _>(StandardNormal));
    }
    let a = DMatrix::from_row_slice(n, n, &entries);
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random Boltzmann machine whose weight spectrum clusters near `±s1`:
/// `W` is the off-diagonal part of `R diag(s1·tanh(s2·n)) Rᵀ` with `R` Haar
/// orthogonal and `n ~ N(0, I)`; biases are `N(0, bias_scale²)`.
pub fn generate_bm_params(seed: u64, n_units: usize, s1: f64, s2: f64, bias_scale: f64) -> Result<BoltzmannMachine> {
    if n_units < 2 {
        return Err(Error::Domain("need at least two units".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_orthogonal(n_units, &mut rng);
    let eig: Vec<f64> = (0..n_units)
        .map(|_| s1 * (s2 * rng.sample::<f64, _>(StandardNormal)).tanh())
        .collect();
    let v = &r * DMatrix::from_diagonal(&DVector::from_vec(eig)) * r.transpose();
    let w = DMatrix::from_fn(n_units, n_units, |i, j| if i == j { 0.0 } else { 0.5 * (v[(i, j)] + v[(j, i)]) });
    let b: Vec<f64> = (0..n_units)
        .map(|_| bias_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    BoltzmannMachine::new(w, b)
}
