use rand::Rng;

use super::{hmc_transition, start_point, BridgeSystem, HmcConfig, TemperatureSchedule};
use crate::error::Result;
use crate::model::{BaseDensity, Potential};
use crate::tempering::TemperedSystem;

/// One annealed importance sampling run from the base to the target.
///
/// Starting from `x ~ base`, each level adds `(β_{n+1} - β_n)(ψ(x) - φ(x))` to
/// the log weight and, except after the final level, applies one HMC update at
/// `β_{n+1}`. The bridge omits `ζ`, so `E[exp(log_weight)] = Z`. Schedule
/// weights are ignored.
pub fn ais_run<P, B, R>(
    system: &TemperedSystem<P, B>,
    schedule: &TemperatureSchedule,
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)>
where
    P: Potential,
    B: BaseDensity,
    R: Rng,
{
    cfg.validate()?;
    let betas = schedule.betas();
    let n_levels = betas.len() - 1;
    let mut x = system.base().sample(rng);
    let mut log_weight = 0.0;
    for n in 0..n_levels {
        let gap = system.base().neg_log_pdf(&x) - system.target().potential(&x);
        log_weight += (betas[n + 1] - betas[n]) * gap;
        if n + 1 < n_levels {
            let bridge = BridgeSystem { system, beta: betas[n + 1] };
            let mut point = start_point(&bridge, x)?;
            hmc_transition(&bridge, &mut point, cfg, rng);
            x = point.q;
        }
    }
    Ok((x, log_weight))
}

/// `n_runs` sequential independent runs sharing one generator.
pub fn ais_batch<P, B, R>(
    system: &TemperedSystem<P, B>,
    schedule: &TemperatureSchedule,
    cfg: &HmcConfig,
    n_runs: usize,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, f64)>>
where
    P: Potential,
    B: BaseDensity,
    R: Rng,
{
    (0..n_runs).map(|_| ais_run(system, schedule, cfg, rng)).collect()
}
