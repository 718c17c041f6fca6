//! Standard HMC, joint and Gibbs continuous tempering, simulated tempering and
//! annealed importance sampling.

mod ais;
mod hmc;
mod st;
mod tempered;
mod trace;

pub use ais::{ais_batch, ais_run};
pub use hmc::hmc_chain;
pub use st::{adapt_st_weights, simulated_tempering_chain, StTrace, TemperatureSchedule};
pub use tempered::{gibbs_ct_chain, joint_ct_chain};
pub use trace::{ChainTrace, SamplerKind, TraceRecord};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{leapfrog_in_place, PhasePoint, SeparableSystem};
use crate::model::{BaseDensity, Potential};
use crate::tempering::TemperedSystem;

pub const DEFAULT_JITTER: f64 = 0.2;

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

/// Step size, nominal trajectory length, step-count jitter and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl HmcConfig {
    pub fn new(step_size: f64, n_leapfrog: usize, seed: u64) -> Self {
        Self { step_size, n_leapfrog, jitter: DEFAULT_JITTER, seed }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Usage(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.n_leapfrog == 0 {
            return Err(Error::Usage("at least one leapfrog step is required".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Usage(format!("jitter must lie in [0, 1), got {}", self.jitter)));
        }
        Ok(())
    }

    /// Inclusive range of trajectory lengths, `[⌈(1-j)L⌉, ⌊(1+j)L⌋]`.
    pub fn step_range(&self) -> (usize, usize) {
        let l = self.n_leapfrog as f64;
        let lo = ((1.0 - self.jitter) * l).ceil().max(1.0) as usize;
        let hi = ((1.0 + self.jitter) * l).floor().max(lo as f64) as usize;
        (lo, hi)
    }

    fn draw_steps<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let (lo, hi) = self.step_range();
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Transition {
    pub accepted: bool,
    pub divergent: bool,
    pub hamiltonian: f64,
}

/// One Metropolis-adjusted HMC update of `current`, whose cached potential and
/// gradient must belong to `system`.
pub(crate) fn hmc_transition<S, R>(system: &S, current: &mut PhasePoint, cfg: &HmcConfig, rng: &mut R) -> Transition
where
    S: SeparableSystem + ?Sized,
    R: Rng + ?Sized,
{
    for (p, m) in current.p.iter_mut().zip(system.mass_diag()) {
        let z: f64 = rng.sample(StandardNormal);
        *p = m.sqrt() * z;
    }
    let h0 = current.hamiltonian(system);
    let n_steps = cfg.draw_steps(rng);
    let mut proposal = current.clone();
    let outcome = leapfrog_in_place(system, &mut proposal, cfg.step_size, n_steps);
    let log_u = rng.random::<f64>().ln();
    match outcome {
        Err(_) => Transition { accepted: false, divergent: true, hamiltonian: h0 },
        Ok(()) => {
            let h1 = proposal.hamiltonian(system);
            if log_u < h0 - h1 {
                *current = proposal;
                Transition { accepted: true, divergent: false, hamiltonian: h1 }
            } else {
                Transition { accepted: false, divergent: false, hamiltonian: h0 }
            }
        }
    }
}

pub(crate) fn start_point<S: SeparableSystem + ?Sized>(system: &S, q: Vec<f64>) -> Result<PhasePoint> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Initialization("initial state is not finite".into()));
    }
    let p = vec![0.0; q.len()];
    let point = PhasePoint::new(system, q, p);
    if !point.is_finite() {
        return Err(Error::Initialization(format!("non-finite potential {} at the initial state", point.potential)));
    }
    Ok(point)
}

/// `φ` with a diagonal mass matrix.
pub struct TargetSystem<'a, P> {
    pub target: &'a P,
    pub mass: Vec<f64>,
}

impl<'a, P: Potential> TargetSystem<'a, P> {
    /// Unit masses.
    pub fn new(target: &'a P) -> Self {
        Self { target, mass: vec![1.0; target.dim()] }
    }
}

impl<P: Potential> SeparableSystem for TargetSystem<'_, P> {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    fn potential_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.target.potential_and_gradient(q, grad)
    }
}

/// The bridge `β(φ + log ζ) + (1 - β)ψ` at a fixed β.
pub struct BridgeSystem<'a, P, B> {
    pub system: &'a TemperedSystem<P, B>,
    pub beta: f64,
}

impl<P: Potential, B: BaseDensity> SeparableSystem for BridgeSystem<'_, P, B> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn mass_diag(&self) -> &[f64] {
        self.system.mass_diag()
    }

    fn potential_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.system.bridge_potential(q, self.beta, grad)
    }
}

/// `(x, u)` flattened into one position vector with masses `(M, m)`.
pub struct ExtendedSystem<'a, P, B> {
    pub system: &'a TemperedSystem<P, B>,
    pub mass: Vec<f64>,
}

impl<'a, P: Potential, B: BaseDensity> ExtendedSystem<'a, P, B> {
    pub fn new(system: &'a TemperedSystem<P, B>) -> Self {
        let mut mass = system.mass_diag().to_vec();
        mass.push(system.control_mass());
        Self { system, mass }
    }
}

impl<P: Potential, B: BaseDensity> SeparableSystem for ExtendedSystem<'_, P, B> {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    fn potential_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let d = q.len() - 1;
        let (value, du) = self.system.extended_potential_and_grad(&q[..d], q[d], &mut grad[..d]);
        grad[d] = du;
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_ranges() {
        assert_eq!(HmcConfig::new(0.1, 10, 0).step_range(), (8, 12));
        assert_eq!(HmcConfig::new(0.1, 10, 0).with_jitter(0.0).step_range(), (10, 10));
        assert_eq!(HmcConfig::new(0.1, 1, 0).step_range(), (1, 1));
        assert_eq!(HmcConfig::new(0.1, 3, 0).with_jitter(0.5).step_range(), (2, 4));
    }

    #[test]
    fn validation() {
        assert!(HmcConfig::new(0.0, 10, 0).validate().is_err());
        assert!(HmcConfig::new(0.1, 0, 0).validate().is_err());
        assert!(HmcConfig::new(0.1, 5, 0).with_jitter(1.0).validate().is_err());
        assert!(HmcConfig::new(0.1, 5, 0).validate().is_ok());
    }

    #[test]
    fn config_json_defaults_jitter() {
        let cfg: HmcConfig = serde_json::from_str(r#"{"step_size":0.2,"n_leapfrog":8}"#).unwrap();
        assert_eq!(cfg.jitter, DEFAULT_JITTER);
        assert_eq!(cfg.seed, 0);
    }
}
