use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{hmc_transition, start_point, BridgeSystem, ChainTrace, HmcConfig, SamplerKind, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::math::{log_sum_exp, LogAccumulator};
use crate::model::{BaseDensity, Potential};
use crate::tempering::TemperedSystem;

/// Inverse temperatures `0 = β_0 < … < β_N = 1` with prior log weights `w_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    betas: Vec<f64>,
    weights: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn new(betas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(betas.len(), weights.len())?;
        if betas.len() < 2 {
            return Err(Error::Domain("a schedule needs at least the two endpoints".into()));
        }
        if betas[0] != 0.0 || betas[betas.len() - 1] != 1.0 {
            return Err(Error::Domain("schedule must start at exactly 0 and end at exactly 1".into()));
        }
        if betas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("schedule must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("schedule weights must be finite".into()));
        }
        Ok(Self { betas, weights })
    }

    /// `count` equally spaced inverse temperatures with zero weights.
    pub fn linear(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Domain("a schedule needs at least the two endpoints".into()));
        }
        let n = (count - 1) as f64;
        let mut betas: Vec<f64> = (0..count).map(|i| i as f64 / n).collect();
        betas[count - 1] = 1.0;
        Self::new(betas, vec![0.0; count])
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.betas.clone(), weights)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalised `log p(β_n | x) = -β_nΔ(x) + w_n - log Σ_m exp(-β_mΔ(x) + w_m)`.
    pub fn log_conditionals(&self, delta: f64) -> Vec<f64> {
        let mut l: Vec<f64> = self.betas.iter().zip(&self.weights).map(|(b, w)| -b * delta + w).collect();
        let norm = log_sum_exp(&l);
        for v in &mut l {
            *v -= norm;
        }
        l
    }

    /// Averaged conditionals `log (1/S) Σ_s p(β_n | x_s)` for every level.
    pub fn log_marginals(&self, deltas: &[f64]) -> Vec<f64> {
        let mut acc = vec![LogAccumulator::new(); self.len()];
        for &d in deltas {
            for (a, l) in acc.iter_mut().zip(self.log_conditionals(d)) {
                a.push(l);
            }
        }
        acc.iter().map(LogAccumulator::log_mean).collect()
    }
}

/// Simulated-tempering chain. The conditional vector `p(β_n | x_s)` for any
/// sample is a function of its recorded `Δ(x_s)` and the schedule, and is
/// rebuilt on demand rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StTrace {
    pub trace: ChainTrace,
    pub schedule: TemperatureSchedule,
    pub levels: Vec<usize>,
}

impl StTrace {
    pub fn conditionals(&self, i: usize) -> Vec<f64> {
        let delta = self.trace.records[i].delta.expect("tempered traces always record Δ");
        self.schedule.log_conditionals(delta).into_iter().map(f64::exp).collect()
    }
}

fn draw_level<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (n, l) in log_probs.iter().enumerate() {
        cum += l.exp();
        if u < cum {
            return n;
        }
    }
    log_probs.len() - 1
}

/// Alternates a categorical draw of the temperature index given `x` with one
/// HMC update of `x` at that temperature. `log ζ` enters the bridge exactly as
/// in continuous tempering.
pub fn simulated_tempering_chain<P, B, R>(
    system: &TemperedSystem<P, B>,
    schedule: &TemperatureSchedule,
    init_x: &[f64],
    cfg: &HmcConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<StTrace>
where
    P: Potential,
    B: BaseDensity,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let d = system.dim();
    check_dim(d, init_x.len())?;
    let mut x = init_x.to_vec();
    let mut delta = system.delta(&x);
    if !delta.is_finite() {
        return Err(Error::Initialization(format!("Δ(x) = {delta} at the initial state")));
    }
    let mut trace = ChainTrace::with_capacity(SamplerKind::SimulatedTempering, d, n_samples);
    let mut levels = Vec::with_capacity(n_samples);
    for iter in 0..n_samples {
        let n = draw_level(&schedule.log_conditionals(delta), rng);
        let beta = schedule.betas()[n];
        let bridge = BridgeSystem { system, beta };
        let mut point = start_point(&bridge, x)?;
        let t = hmc_transition(&bridge, &mut point, cfg, rng);
        trace.n_divergent += usize::from(t.divergent);
        x = point.q;
        delta = system.delta(&x);
        levels.push(n);
        trace.records.push(TraceRecord {
            iter,
            beta,
            u: None,
            delta: Some(delta),
            hamiltonian: t.hamiltonian,
            accepted: t.accepted,
            x: x.clone(),
        });
    }
    Ok(StTrace { trace, schedule: schedule.clone(), levels })
}

/// One round of weight adaptation from a pilot run: `w_n ← w_n - log P̂(n)`
/// with `P̂` the averaged conditionals, shifted so that `w_0 = 0`. Flattens the
/// level occupancy.
pub fn adapt_st_weights(schedule: &TemperatureSchedule, deltas: &[f64]) -> Result<TemperatureSchedule> {
    if deltas.is_empty() {
        return Err(Error::Usage("weight adaptation needs a non-empty pilot run".into()));
    }
    let log_p = schedule.log_marginals(deltas);
    let raw: Vec<f64> = schedule.weights().iter().zip(&log_p).map(|(w, l)| w - l).collect();
    let w0 = raw[0];
    schedule.with_weights(raw.into_iter().map(|w| w - w0).collect())
}
