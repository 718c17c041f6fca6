//! Leapfrog integration of separable Hamiltonians `U(q) + ½pᵀM⁻¹p` with a
//! diagonal mass matrix.

use crate::error::{check_dim, Error, Result};

/// A trajectory whose energy error exceeds this is abandoned.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Potential energy and diagonal mass matrix of a separable Hamiltonian.
pub trait SeparableSystem {
    fn dim(&self) -> usize;

    fn mass_diag(&self) -> &[f64];

    /// `U(q)`, with `∇U(q)` written into `grad`.
    fn potential_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(self.mass_diag()).map(|(p, m)| p * p / m).sum::<f64>()
    }
}

/// Closure-backed system.
pub struct FnSystem<F> {
    mass: Vec<f64>,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> FnSystem<F> {
    pub fn new(mass: Vec<f64>, f: F) -> Self {
        Self { mass, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> f64> SeparableSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn mass_diag(&self) -> &[f64] {
        &self.mass
    }

    fn potential_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(q, grad)
    }
}

/// Trajectory abandoned because of a non-finite value or an energy error above
/// [`DIVERGENCE_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub energy_error: f64,
}

/// Phase-space point with the potential and gradient cached at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub potential: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    pub fn new<S: SeparableSystem + ?Sized>(system: &S, q: Vec<f64>, p: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let potential = system.potential_and_grad(&q, &mut grad);
        Self { q, p, potential, grad }
    }

    pub fn hamiltonian<S: SeparableSystem + ?Sized>(&self, system: &S) -> f64 {
        self.potential + system.kinetic(&self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.potential.is_finite() && self.grad.iter().chain(&self.q).chain(&self.p).all(|v| v.is_finite())
    }
}

/// Advances `point` by `n_steps` leapfrog steps of size `step_size`, with the
/// inner half kicks fused. Stops early on divergence, leaving `point` at the
/// offending step.
pub fn leapfrog_in_place<S: SeparableSystem + ?Sized>(
    system: &S,
    point: &mut PhasePoint,
    step_size: f64,
    n_steps: usize,
) -> std::result::Result<(), Divergence> {
    let h0 = point.hamiltonian(system);
    let mass = system.mass_diag();
    let half = 0.5 * step_size;
    for (p, g) in point.p.iter_mut().zip(&point.grad) {
        *p -= half * g;
    }
    for step in 1..=n_steps {
        for ((q, p), m) in point.q.iter_mut().zip(&point.p).zip(mass) {
            *q += step_size * p / m;
        }
        point.potential = system.potential_and_grad(&point.q, &mut point.grad);
        let kick = if step == n_steps { half } else { step_size };
        for (p, g) in point.p.iter_mut().zip(&point.grad) {
            *p -= kick * g;
        }
        let error = point.hamiltonian(system) - h0;
        if !point.is_finite() || !error.is_finite() || error.abs() > DIVERGENCE_THRESHOLD {
            return Err(Divergence { step, energy_error: error });
        }
    }
    Ok(())
}

/// Leapfrog from `(q0, p0)`; returns the end point `(q, p)`.
pub fn leapfrog<S: SeparableSystem + ?Sized>(
    system: &S,
    q0: &[f64],
    p0: &[f64],
    step_size: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(system.dim(), q0.len())?;
    check_dim(system.dim(), p0.len())?;
    if !(step_size > 0.0) || n_steps == 0 {
        return Err(Error::Domain("leapfrog needs a positive step size and at least one step".into()));
    }
    let mut point = PhasePoint::new(system, q0.to_vec(), p0.to_vec());
    if !point.is_finite() {
        return Err(Error::Initialization("non-finite potential or gradient at the start point".into()));
    }
    leapfrog_in_place(system, &mut point, step_size, n_steps)
        .map_err(|d| Error::Numerical(format!("trajectory diverged at step {} (energy error {})", d.step, d.energy_error)))?;
    Ok((point.q, point.p))
}
