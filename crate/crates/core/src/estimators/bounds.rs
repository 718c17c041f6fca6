use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaseDensity, Potential};
use crate::quadrature::integrate;
use crate::tempering::{log_w0, TemperedSystem};

/// Absolute tolerance of every quadrature in the oracle.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Half-width of the integration window in base standard deviations.
pub const WINDOW_SDS: f64 = 12.0;
/// Slack allowed, in log space, before a bound counts as violated.
pub const BOUND_TOLERANCE: f64 = 1e-8;

const SCAN_POINTS: usize = 4001;

/// Quadrature ground truth for a one-dimensional tempered system: `log Z`,
/// both KL divergences between base and normalised target, and the exact
/// β marginal.
pub struct QuadratureOracle<'a, P, B> {
    system: &'a TemperedSystem<P, B>,
    lo: f64,
    hi: f64,
    pub log_z: f64,
    /// `KL(base ‖ target)`.
    pub d_bt: f64,
    /// `KL(target ‖ base)`.
    pub d_tb: f64,
    log_norm: f64,
}

impl<'a, P: Potential, B: BaseDensity> QuadratureOracle<'a, P, B> {
    pub fn new(system: &'a TemperedSystem<P, B>) -> Result<Self> {
        if system.dim() != 1 {
            return Err(Error::Usage(format!("quadrature oracle needs a 1-D system, got dimension {}", system.dim())));
        }
        let mean = system.base().mean()[0];
        let sd = system.base().covariance()[(0, 0)].sqrt();
        let (lo, hi) = (mean - WINDOW_SDS * sd, mean + WINDOW_SDS * sd);
        let phi = |x: f64| system.target().potential(&[x]);
        let psi = |x: f64| system.base().neg_log_pdf(&[x]);

        let log_z = log_integral(phi, lo, hi)?;
        let e_base = integrate(|x| (-psi(x)).exp() * (phi(x) - psi(x)), lo, hi, QUADRATURE_TOLERANCE)?;
        let d_bt = e_base + log_z;
        let shift = scan_min(phi, lo, hi);
        let t_mass = integrate(|x| (shift - phi(x)).exp(), lo, hi, QUADRATURE_TOLERANCE)?;
        let t_moment = integrate(|x| (shift - phi(x)).exp() * (psi(x) - phi(x)), lo, hi, QUADRATURE_TOLERANCE)?;
        let d_tb = t_moment / t_mass - log_z;
        let log_norm = log_integral(|x| psi(x) + log_w0(system.delta(&[x])), lo, hi)?;
        Ok(Self { system, lo, hi, log_z, d_bt, d_tb, log_norm })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `log ∫ exp[-β(φ + log ζ) - (1 - β)ψ] dx`.
    pub fn log_bridge_normaliser(&self, beta: f64) -> Result<f64> {
        let s = self.system;
        log_integral(
            |x| beta * (s.target().potential(&[x]) + s.log_zeta()) + (1.0 - beta) * s.base().neg_log_pdf(&[x]),
            self.lo,
            self.hi,
        )
    }

    /// Exact density of β under the joint.
    pub fn beta_density(&self, beta: f64) -> Result<f64> {
        Ok((self.log_bridge_normaliser(beta)? - self.log_norm).exp())
    }

    pub fn log_zeta(&self) -> f64 {
        self.system.log_zeta()
    }
}

fn scan_min<F: Fn(f64) -> f64>(energy: F, lo: f64, hi: f64) -> f64 {
    let h = (hi - lo) / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS).map(|i| energy(lo + i as f64 * h)).filter(|e| e.is_finite()).fold(f64::INFINITY, f64::min)
}

/// `log ∫ exp(-E(x)) dx` with the integrand rescaled by its scanned maximum.
fn log_integral<F: Fn(f64) -> f64>(energy: F, lo: f64, hi: f64) -> Result<f64> {
    let m = scan_min(&energy, lo, hi);
    if !m.is_finite() {
        return Err(Error::Quadrature("energy is not finite anywhere in the window".into()));
    }
    let i = integrate(|x| (m - energy(x)).exp(), lo, hi, QUADRATURE_TOLERANCE)?;
    if !(i > 0.0) {
        return Err(Error::Quadrature(format!("integral evaluated to {i}")));
    }
    Ok(i.ln() - m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub beta: f64,
    /// `log[p(β) / p(0)]`.
    pub log_cp: f64,
    pub log_upper: f64,
    pub log_lower_bt: f64,
    pub log_lower_tb: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub log_z: f64,
    pub log_zeta: f64,
    pub d_bt: f64,
    pub d_tb: f64,
    pub points: Vec<BoundPoint>,
    pub max_violation: f64,
    pub holds: bool,
}

/// Checks `(Z/ζ)^β e^{-β d_bt} ≤ p(β)/p(0) ≤ (Z/ζ)^β` and
/// `(Z/ζ)^β e^{-(1-β) d_tb} ≤ p(β)/p(0)` at every grid point, in log space.
pub fn check_marginal_bounds<P: Potential, B: BaseDensity>(
    oracle: &QuadratureOracle<'_, P, B>,
    beta_grid: &[f64],
) -> Result<BoundReport> {
    if let Some(b) = beta_grid.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::Domain(format!("grid point {b} is outside [0, 1]")));
    }
    let log_z0 = oracle.log_bridge_normaliser(0.0)?;
    let gap = oracle.log_z - oracle.log_zeta();
    let mut points = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let log_cp = oracle.log_bridge_normaliser(beta)? - log_z0;
        let log_upper = beta * gap;
        let log_lower_bt = log_upper - beta * oracle.d_bt;
        let log_lower_tb = log_upper - (1.0 - beta) * oracle.d_tb;
        let violation = (log_cp - log_upper).max(log_lower_bt - log_cp).max(log_lower_tb - log_cp);
        points.push(BoundPoint { beta, log_cp, log_upper, log_lower_bt, log_lower_tb, violation });
    }
    let max_violation = points.iter().map(|p| p.violation).fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundReport {
        log_z: oracle.log_z,
        log_zeta: oracle.log_zeta(),
        d_bt: oracle.d_bt,
        d_tb: oracle.d_tb,
        points,
        max_violation,
        holds: max_violation <= BOUND_TOLERANCE,
    })
}
