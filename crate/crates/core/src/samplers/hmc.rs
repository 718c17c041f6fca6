use rand::Rng;

use super::{hmc_transition, start_point, ChainTrace, HmcConfig, SamplerKind, TargetSystem, TraceRecord};
use crate::error::{check_dim, Result};
use crate::model::Potential;

/// Standard HMC on `φ` with unit masses.
pub fn hmc_chain<P, R>(model: &P, init: &[f64], cfg: &HmcConfig, n_samples: usize, rng: &mut R) -> Result<ChainTrace>
where
    P: Potential + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_dim(model.dim(), init.len())?;
    let system = TargetSystem { target: &model, mass: vec![1.0; init.len()] };
    let mut point = start_point(&system, init.to_vec())?;
    let mut trace = ChainTrace::with_capacity(SamplerKind::Hmc, init.len(), n_samples);
    for iter in 0..n_samples {
        let t = hmc_transition(&system, &mut point, cfg, rng);
        trace.n_divergent += usize::from(t.divergent);
        trace.records.push(TraceRecord {
            iter,
            beta: 1.0,
            u: None,
            delta: None,
            hamiltonian: t.hamiltonian,
            accepted: t.accepted,
            x: point.q.clone(),
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianDensity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_gaussian() {
        let target = GaussianDensity::standard(1);
        let cfg = HmcConfig::new(0.2, 8, 1);
        let trace = hmc_chain(&target, &[0.0], &cfg, 5000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(trace.len(), 5000);
        assert!(trace.acceptance_rate() > 0.9);
        let mean = trace.records.iter().map(|r| r.x[0]).sum::<f64>() / 5000.0;
        // draws are nearly independent at this trajectory length
        assert!(mean.abs() < 4.0 / 5000f64.sqrt(), "{mean}");
    }

    #[test]
    fn tiny_steps_always_accept() {
        let target = GaussianDensity::standard(2);
        let cfg = HmcConfig::new(1e-6, 5, 0);
        let trace = hmc_chain(&target, &[0.3, -1.0], &cfg, 200, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(trace.acceptance_rate(), 1.0);
    }

    #[test]
    fn deterministic_and_checked() {
        let target = GaussianDensity::standard(1);
        let cfg = HmcConfig::new(0.3, 5, 0);
        let a = hmc_chain(&target, &[0.0], &cfg, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = hmc_chain(&target, &[0.0], &cfg, 100, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(hmc_chain(&target, &[f64::NAN], &cfg, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(hmc_chain(&target, &[0.0, 0.0], &cfg, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
