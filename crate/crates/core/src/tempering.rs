//! Inverse-temperature control map, the extended Hamiltonian on `(x, u, p, v)`
//! and the closed-form quantities that follow from the geometric bridge
//! `exp[-β(φ + log ζ) - (1 - β)ψ]`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{log1mexp, log_expm1, softplus};
use crate::model::{Base, BaseDensity, Model, ModelDoc, Potential};

/// Below this `|Δ|` the conditional on β is uniform and the weights use
/// their second-order series.
pub const SMALL_DELTA: f64 = 1e-8;

/// Map from the unbounded control variable `u` to `β ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMap {
    #[default]
    Logistic,
}

impl ControlMap {
    pub fn beta(self, u: f64) -> f64 {
        match self {
            ControlMap::Logistic => beta(u),
        }
    }

    pub fn log_beta_grad(self, u: f64) -> f64 {
        match self {
            ControlMap::Logistic => log_beta_grad(u),
        }
    }

    /// `d log β′(u) / du`.
    pub fn d_log_beta_grad(self, u: f64) -> f64 {
        match self {
            ControlMap::Logistic => 1.0 - 2.0 * beta(u),
        }
    }

    pub fn beta_grad(self, u: f64) -> f64 {
        match self {
            ControlMap::Logistic => beta_grad(u),
        }
    }
}

/// Logistic sigmoid, evaluated on the branch that never overflows.
#[inline]
pub fn beta(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn beta_grad(u: f64) -> f64 {
    log_beta_grad(u).exp()
}

/// `log σ′(u) = -softplus(u) - softplus(-u)`.
#[inline]
pub fn log_beta_grad(u: f64) -> f64 {
    -softplus(u) - softplus(-u)
}

/// `log w0(Δ) = log[Δ / (1 - exp(-Δ))]`, proportional to `p(β = 0 | x)`.
pub fn log_w0(delta: f64) -> f64 {
    if delta.abs() < SMALL_DELTA {
        0.5 * delta - delta * delta / 24.0
    } else if delta > 0.0 {
        delta.ln() - log1mexp(delta)
    } else {
        (-delta).ln() - log_expm1(-delta)
    }
}

/// `log w1(Δ) = log[Δ / (exp(Δ) - 1)] = log w0(Δ) - Δ`, proportional to
/// `p(β = 1 | x)`.
pub fn log_w1(delta: f64) -> f64 {
    log_w0(delta) - delta
}

/// Inverse CDF of the exponential distribution with rate `Δ` truncated to
/// `[0, 1]`, evaluated at `uniform ∈ [0, 1)`. Negative rates are handled by
/// reflecting about `β = ½`, which keeps `expm1` in range.
pub fn truncated_exp_inverse_cdf(delta: f64, uniform: f64) -> f64 {
    let beta = if delta.abs() < SMALL_DELTA {
        uniform
    } else if delta > 0.0 {
        -(uniform * (-delta).exp_m1()).ln_1p() / delta
    } else {
        1.0 - ((1.0 - uniform) * delta.exp_m1()).ln_1p() / delta
    };
    beta.clamp(0.0, 1.0)
}

/// Position, control variable and their conjugate momenta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub x: Vec<f64>,
    pub u: f64,
    pub p: Vec<f64>,
    pub v: f64,
}

impl ExtendedState {
    /// State at rest.
    pub fn at(x: Vec<f64>, u: f64) -> Self {
        let p = vec![0.0; x.len()];
        Self { x, u, p, v: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// Target, normalised base, `log ζ`, control map and diagonal masses.
#[derive(Debug, Clone)]
pub struct TemperedSystem<P, B> {
    target: P,
    base: B,
    log_zeta: f64,
    control: ControlMap,
    mass_diag: Vec<f64>,
    control_mass: f64,
}

impl<P: Potential, B: BaseDensity> TemperedSystem<P, B> {
    /// Unit masses for `x` and for `u`.
    pub fn new(target: P, base: B, log_zeta: f64) -> Result<Self> {
        check_dim(target.dim(), base.dim())?;
        if !log_zeta.is_finite() {
            return Err(Error::Domain(format!("log ζ must be finite, got {log_zeta}")));
        }
        let d = target.dim();
        Ok(Self { target, base, log_zeta, control: ControlMap::Logistic, mass_diag: vec![1.0; d], control_mass: 1.0 })
    }

    pub fn with_masses(mut self, mass_diag: Vec<f64>, control_mass: f64) -> Result<Self> {
        check_dim(self.dim(), mass_diag.len())?;
        if !mass_diag.iter().chain([&control_mass]).all(|m| m.is_finite() && *m > 0.0) {
            return Err(Error::Domain("masses must be positive and finite".into()));
        }
        self.mass_diag = mass_diag;
        self.control_mass = control_mass;
        Ok(self)
    }

    pub fn with_log_zeta(mut self, log_zeta: f64) -> Result<Self> {
        if !log_zeta.is_finite() {
            return Err(Error::Domain(format!("log ζ must be finite, got {log_zeta}")));
        }
        self.log_zeta = log_zeta;
        Ok(self)
    }

    /// Same target, masses and control map with a different base and `log ζ`.
    pub fn with_base<B2: BaseDensity>(&self, base: B2, log_zeta: f64) -> Result<TemperedSystem<P, B2>>
    where
        P: Clone,
    {
        TemperedSystem::new(self.target.clone(), base, log_zeta)?
            .with_masses(self.mass_diag.clone(), self.control_mass)
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn target(&self) -> &P {
        &self.target
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn log_zeta(&self) -> f64 {
        self.log_zeta
    }

    pub fn control(&self) -> ControlMap {
        self.control
    }

    pub fn mass_diag(&self) -> &[f64] {
        &self.mass_diag
    }

    pub fn control_mass(&self) -> f64 {
        self.control_mass
    }

    /// `Δ(x) = φ(x) + log ζ - ψ(x)`.
    pub fn delta(&self, x: &[f64]) -> f64 {
        self.target.potential(x) + self.log_zeta - self.base.neg_log_pdf(x)
    }

    pub fn try_delta(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.delta(x))
    }

    /// `(φ(x), ψ(x))` with their gradients written into `grad_phi`, `grad_psi`.
    pub fn energies(&self, x: &[f64], grad_phi: &mut [f64], grad_psi: &mut [f64]) -> (f64, f64) {
        let phi = self.target.potential_and_gradient(x, grad_phi);
        let psi = self.base.neg_log_pdf_and_gradient(x, grad_psi);
        (phi, psi)
    }

    /// Bridge energy `β(φ + log ζ) + (1 - β)ψ` at fixed β; its gradient in `x`
    /// is written to `grad`.
    pub fn bridge_potential(&self, x: &[f64], beta: f64, grad: &mut [f64]) -> f64 {
        let mut grad_psi = vec![0.0; x.len()];
        let (phi, psi) = self.energies(x, grad, &mut grad_psi);
        for (g, gp) in grad.iter_mut().zip(&grad_psi) {
            *g = beta * *g + (1.0 - beta) * gp;
        }
        beta * (phi + self.log_zeta) + (1.0 - beta) * psi
    }

    /// Potential part of the extended Hamiltonian, the negative log density of
    /// `(x, u)`. Gradients go to `grad_x` and the returned `du` slot.
    pub fn extended_potential_and_grad(&self, x: &[f64], u: f64, grad_x: &mut [f64]) -> (f64, f64) {
        let mut grad_psi = vec![0.0; x.len()];
        let (phi, psi) = self.energies(x, grad_x, &mut grad_psi);
        let b = self.control.beta(u);
        for (g, gp) in grad_x.iter_mut().zip(&grad_psi) {
            *g = b * *g + (1.0 - b) * gp;
        }
        let delta = phi + self.log_zeta - psi;
        let value = b * (phi + self.log_zeta) + (1.0 - b) * psi - self.control.log_beta_grad(u);
        let du = self.control.beta_grad(u) * delta - self.control.d_log_beta_grad(u);
        (value, du)
    }

    pub fn extended_potential(&self, x: &[f64], u: f64) -> f64 {
        let b = self.control.beta(u);
        b * (self.target.potential(x) + self.log_zeta) + (1.0 - b) * self.base.neg_log_pdf(x)
            - self.control.log_beta_grad(u)
    }

    /// `h̃ = β(φ + log ζ) + (1 - β)ψ - log β′(u) + ½pᵀM⁻¹p + v²/2m`.
    pub fn extended_hamiltonian(&self, state: &ExtendedState) -> f64 {
        self.extended_potential(&state.x, state.u) + self.kinetic(&state.p, state.v)
    }

    pub fn kinetic(&self, p: &[f64], v: f64) -> f64 {
        let kx: f64 = p.iter().zip(&self.mass_diag).map(|(p, m)| p * p / m).sum();
        0.5 * (kx + v * v / self.control_mass)
    }

    /// `(∂h̃/∂x, ∂h̃/∂u)`.
    pub fn extended_gradients(&self, state: &ExtendedState) -> Result<(Vec<f64>, f64)> {
        check_dim(self.dim(), state.x.len())?;
        let mut gx = vec![0.0; state.x.len()];
        let (_, du) = self.extended_potential_and_grad(&state.x, state.u, &mut gx);
        Ok((gx, du))
    }

    /// Unnormalised `log π(x, β) = -βφ(x) - (1 - β)ψ(x) - β log ζ`.
    pub fn joint_log_density_x_beta(&self, x: &[f64], beta: f64) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("β must lie in [0, 1], got {beta}")));
        }
        Ok(-beta * self.target.potential(x) - (1.0 - beta) * self.base.neg_log_pdf(x) - beta * self.log_zeta)
    }

    /// Exact draw from `p(β | x) ∝ exp(-βΔ(x))` on `[0, 1]`.
    pub fn sample_beta_conditional<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        sample_beta_given_delta(self.delta(x), rng)
    }
}

fn unit_mass() -> f64 {
    1.0
}

/// JSON form of a tempered system built from the built-in families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub target: ModelDoc,
    pub base: ModelDoc,
    pub log_zeta: f64,
    #[serde(default = "unit_mass")]
    pub control_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_diag: Option<Vec<f64>>,
}

impl SystemDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("invalid system document: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system documents always serialise")
    }

    pub fn build(&self) -> Result<TemperedSystem<Model, Base>> {
        let target = self.target.into_model()?;
        let base = self.base.into_model()?.into_base()?;
        let mass = self.mass_diag.clone().unwrap_or_else(|| vec![1.0; target.dim()]);
        TemperedSystem::new(target, base, self.log_zeta)?.with_masses(mass, self.control_mass)
    }

    pub fn describe<P, B>(system: &TemperedSystem<P, B>, target: ModelDoc, base: ModelDoc) -> Self
    where
        P: Potential,
        B: BaseDensity,
    {
        let unit = system.mass_diag().iter().all(|&m| m == 1.0);
        Self {
            target,
            base,
            log_zeta: system.log_zeta(),
            control_mass: system.control_mass(),
            mass_diag: (!unit).then(|| system.mass_diag().to_vec()),
        }
    }
}

pub fn sample_beta_given_delta<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> f64 {
    truncated_exp_inverse_cdf(delta, rng.random::<f64>())
}

/// Draws from the base through the object-safe sampler.
pub fn sample_base<B: BaseDensity + ?Sized>(base: &B, rng: &mut dyn RngCore) -> Vec<f64> {
    base.sample(rng)
}
