//! Base densities and `log ζ` for tempering: mean-field local approximations
//! of Boltzmann machine relaxations, their moment-matched Gaussian and an
//! iterative refit from tempered samples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ct_log_z, ct_log_weights, ct_report, weighted_moments, EstimateReport, Which, DEFAULT_BURN_IN};
use crate::math::log_sum_exp;
use crate::model::{BaseDensity, BoltzmannMachine, GaussianDensity, Potential, RelaxationModel};
use crate::samplers::{joint_ct_chain, HmcConfig};
use crate::tempering::{ExtendedState, TemperedSystem};

pub const MEANFIELD_DAMPING: f64 = 0.5;
pub const MEANFIELD_TOLERANCE: f64 = 1e-8;
pub const MEANFIELD_MAX_ITERS: usize = 10_000;
/// Magnetisations closer than this in every coordinate are one solution.
pub const DEDUP_TOLERANCE: f64 = 1e-3;
/// Ridge added to fitted covariances.
pub const COV_REGULARISATION: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub m: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Damped parallel fixed-point iteration `m ← ½m + ½tanh(Wm + b)`.
pub fn meanfield_bm(bm: &BoltzmannMachine, init_m: &[f64]) -> Result<MeanField> {
    crate::error::check_dim(bm.n_units(), init_m.len())?;
    if init_m.iter().any(|m| !(m.abs() < 1.0)) {
        return Err(Error::Domain("mean-field initialisation must lie in (-1, 1)".into()));
    }
    let mut m = DVector::from_column_slice(init_m);
    for it in 1..=MEANFIELD_MAX_ITERS {
        let field = bm.weights() * &m + bm.biases();
        let next = m.zip_map(&field, |m, f| (1.0 - MEANFIELD_DAMPING) * m + MEANFIELD_DAMPING * f.tanh());
        let change = (&next - &m).amax();
        m = next;
        if change < MEANFIELD_TOLERANCE {
            return Ok(MeanField { m: m.iter().copied().collect(), converged: true, iterations: it });
        }
    }
    Ok(MeanField { m: m.iter().copied().collect(), converged: false, iterations: MEANFIELD_MAX_ITERS })
}

/// Gaussian `N(mean, I)` around one relaxation mode with its ELBO `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalApprox {
    pub mean: Vec<f64>,
    pub magnetisation: Vec<f64>,
    pub elbo: f64,
    /// Monte Carlo standard error of `elbo`.
    pub elbo_se: f64,
}

/// `ℓ ≈ E_z[-φ(μ + z)] + (D/2)(1 + log 2π)` for `z ~ N(0, I)`, with its
/// standard error.
pub fn mc_elbo<P: Potential + ?Sized, R: Rng + ?Sized>(target: &P, mean: &[f64], mc_samples: usize, rng: &mut R) -> (f64, f64) {
    let d = mean.len();
    let mut x = vec![0.0; d];
    let vals: Vec<f64> = (0..mc_samples)
        .map(|_| {
            for (xi, mi) in x.iter_mut().zip(mean) {
                let z: f64 = rng.sample(StandardNormal);
                *xi = mi + z;
            }
            -target.potential(&x)
        })
        .collect();
    let n = mc_samples as f64;
    let avg = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (avg + 0.5 * d as f64 * (1.0 + LN_2PI), (var / n).sqrt())
}

/// Unique magnetisations in a canonical order, so the result does not depend
/// on the order in which solutions were found.
pub fn dedup_solutions(mut solutions: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    solutions.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for s in solutions {
        let dup = kept.iter().any(|k| k.iter().zip(&s).all(|(a, b)| (a - b).abs() < DEDUP_TOLERANCE));
        if !dup {
            kept.push(s);
        }
    }
    kept
}

/// Runs mean-field from `n_inits` uniform starts, merges duplicate fixed points
/// and maps each to `N(Qᵀm, I)` with a Monte Carlo ELBO. Falls back to a single
/// local at the origin when no run converges.
pub fn fit_local_approxes<R: Rng + ?Sized>(
    relaxation: &RelaxationModel,
    n_inits: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<Vec<LocalApprox>> {
    if n_inits == 0 || mc_samples < 2 {
        return Err(Error::Usage("need at least one initialisation and two ELBO samples".into()));
    }
    let bm = relaxation.source();
    let n = bm.n_units();
    let mut solutions = Vec::new();
    for _ in 0..n_inits {
        let init: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mf = meanfield_bm(bm, &init)?;
        if mf.converged {
            solutions.push(mf.m);
        }
    }
    let mut unique = dedup_solutions(solutions);
    if unique.is_empty() {
        unique.push(vec![0.0; n]);
    }
    let qt = relaxation.q().transpose();
    Ok(unique
        .into_iter()
        .map(|m| {
            let mean: Vec<f64> = (&qt * DVector::from_column_slice(&m)).iter().copied().collect();
            let (elbo, elbo_se) = mc_elbo(relaxation, &mean, mc_samples, rng);
            LocalApprox { mean, magnetisation: m, elbo, elbo_se }
        })
        .collect())
}

/// Mixture of local approximations weighted by `exp(ℓ_i)`; `log ζ = log Σ exp(ℓ_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureApprox {
    pub locals: Vec<LocalApprox>,
    pub log_zeta: f64,
}

impl MixtureApprox {
    pub fn new(locals: Vec<LocalApprox>) -> Result<Self> {
        if locals.is_empty() {
            return Err(Error::Usage("a mixture needs at least one local approximation".into()));
        }
        let log_zeta = log_sum_exp(&locals.iter().map(|l| l.elbo).collect::<Vec<_>>());
        Ok(Self { locals, log_zeta })
    }

    pub fn responsibilities(&self) -> Vec<f64> {
        self.locals.iter().map(|l| (l.elbo - self.log_zeta).exp()).collect()
    }
}

/// Gaussian with the mixture's mean and covariance (plus a 1e-8 ridge), and
/// the mixture's `log ζ`.
pub fn moment_matched_base(mixture: &MixtureApprox) -> Result<(GaussianDensity, f64)> {
    let d = mixture.locals[0].mean.len();
    let pi = mixture.responsibilities();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    for (l, p) in mixture.locals.iter().zip(&pi) {
        crate::error::check_dim(d, l.mean.len())?;
        let mu = DVector::from_column_slice(&l.mean);
        mean += *p * &mu;
        second += *p * (DMatrix::identity(d, d) + &mu * mu.transpose());
    }
    let cov = second - &mean * mean.transpose() + DMatrix::from_diagonal_element(d, d, COV_REGULARISATION);
    let base = GaussianDensity::new(mean.iter().copied().collect(), cov)?;
    Ok((base, mixture.log_zeta))
}

/// Repeats: run joint continuous tempering, then reset `log ζ` to the `log Z`
/// estimate and the base to a Gaussian with the estimated target moments.
/// Each round starts where the previous chain ended. The reports are computed
/// against the system that produced the samples.
pub fn bootstrap_refit<P, B, R>(
    system: &TemperedSystem<P, B>,
    sampler_cfg: &HmcConfig,
    n_rounds: usize,
    samples_per_round: usize,
    rng: &mut R,
) -> Result<(TemperedSystem<P, GaussianDensity>, Vec<EstimateReport>)>
where
    P: Potential + Clone,
    B: BaseDensity,
    R: Rng + ?Sized,
{
    if n_rounds == 0 {
        return Err(Error::Usage("bootstrap needs at least one round".into()));
    }
    let wrap = |round: usize| move |e: Error| Error::Bootstrap { round, source: Box::new(e) };
    let mut state = ExtendedState::at(system.base().mean(), 0.0);

    let mut reports = Vec::with_capacity(n_rounds);
    let mut current: Option<TemperedSystem<P, GaussianDensity>> = None;
    for round in 0..n_rounds {
        let (trace, report, log_zeta_next, base_next) = match &current {
            None => one_round(system, system.base(), &state, sampler_cfg, samples_per_round, rng),
            Some(sys) => one_round(sys, sys.base(), &state, sampler_cfg, samples_per_round, rng),
        }
        .map_err(wrap(round))?;
        let last = trace.records.last().expect("rounds draw at least one sample");
        state = ExtendedState::at(last.x.clone(), last.u.expect("joint chains record u"));
        reports.push(report);
        current = Some(system.with_base(base_next, log_zeta_next).map_err(wrap(round))?);
    }
    Ok((current.expect("at least one round ran"), reports))
}

fn one_round<P, B, R>(
    system: &TemperedSystem<P, B>,
    base: &dyn BaseDensity,
    state: &ExtendedState,
    cfg: &HmcConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<(crate::samplers::ChainTrace, EstimateReport, f64, GaussianDensity)>
where
    P: Potential,
    B: BaseDensity,
    R: Rng + ?Sized,
{
    if n_samples < 2 {
        return Err(Error::Usage("each round needs at least two samples".into()));
    }
    let trace = joint_ct_chain(system, state, cfg, n_samples, rng)?;
    let records = trace.after_burn_in(DEFAULT_BURN_IN);
    let report = ct_report(records, system.log_zeta(), Some(base))?;
    let log_zeta = ct_log_z(records, system.log_zeta())?;
    if !log_zeta.is_finite() {
        return Err(Error::Numerical(format!("log Z estimate {log_zeta} is not finite")));
    }
    let (mean, cov) = weighted_moments(records, &ct_log_weights(records, Which::Target)?)?;
    let d = mean.len();
    let next = GaussianDensity::new(mean, cov + DMatrix::from_diagonal_element(d, d, COV_REGULARISATION))?;
    Ok((trace, report, log_zeta, next))
}
