use rand::Rng;

use super::{hmc_transition, start_point, BridgeSystem, ChainTrace, ExtendedSystem, HmcConfig, SamplerKind, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::model::{BaseDensity, Potential};
use crate::tempering::{sample_beta_given_delta, ExtendedState, TemperedSystem};

/// HMC on the joint `(x, u)` space. The momenta in `init` are ignored.
pub fn joint_ct_chain<P, B, R>(
    system: &TemperedSystem<P, B>,
    init: &ExtendedState,
    cfg: &HmcConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<ChainTrace>
where
    P: Potential,
    B: BaseDensity,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let d = system.dim();
    check_dim(d, init.x.len())?;
    let ext = ExtendedSystem::new(system);
    let mut q = init.x.clone();
    q.push(init.u);
    let mut point = start_point(&ext, q)?;
    let mut trace = ChainTrace::with_capacity(SamplerKind::JointCt, d, n_samples);
    for iter in 0..n_samples {
        let t = hmc_transition(&ext, &mut point, cfg, rng);
        trace.n_divergent += usize::from(t.divergent);
        let (x, u) = (&point.q[..d], point.q[d]);
        trace.records.push(TraceRecord {
            iter,
            beta: system.control().beta(u),
            u: Some(u),
            delta: Some(system.delta(x)),
            hamiltonian: t.hamiltonian,
            accepted: t.accepted,
            x: x.to_vec(),
        });
    }
    Ok(trace)
}

/// Alternates an exact draw of β given `x` with one HMC update of `x` at
/// fixed β.
pub fn gibbs_ct_chain<P, B, R>(
    system: &TemperedSystem<P, B>,
    init_x: &[f64],
    cfg: &HmcConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<ChainTrace>
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
    let mut trace = ChainTrace::with_capacity(SamplerKind::GibbsCt, d, n_samples);
    for iter in 0..n_samples {
        let beta = sample_beta_given_delta(delta, rng);
        let bridge = BridgeSystem { system, beta };
        let mut point = start_point(&bridge, x)?;
        let t = hmc_transition(&bridge, &mut point, cfg, rng);
        trace.n_divergent += usize::from(t.divergent);
        x = point.q;
        delta = system.delta(&x);
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
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianDensity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn same_system() -> TemperedSystem<GaussianDensity, GaussianDensity> {
        TemperedSystem::new(GaussianDensity::standard(1), GaussianDensity::standard(1), 0.0).unwrap()
    }

    #[test]
    fn joint_chain_records_consistent_fields() {
        let sys = same_system();
        let cfg = HmcConfig::new(0.3, 6, 0);
        let t = joint_ct_chain(&sys, &ExtendedState::at(vec![0.5], 0.0), &cfg, 300, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t.len(), 300);
        for r in &t.records {
            assert_eq!(r.beta, crate::tempering::beta(r.u.unwrap()));
            assert_eq!(r.delta, Some(0.0));
        }
        let again = joint_ct_chain(&sys, &ExtendedState::at(vec![0.5], 0.0), &cfg, 300, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn gibbs_chain_betas_in_range_and_deterministic() {
        let sys = same_system();
        let cfg = HmcConfig::new(0.3, 6, 0);
        let t = gibbs_ct_chain(&sys, &[0.5], &cfg, 300, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(t.records.iter().all(|r| (0.0..=1.0).contains(&r.beta)));
        assert_eq!(t, gibbs_ct_chain(&sys, &[0.5], &cfg, 300, &mut ChaCha8Rng::seed_from_u64(4)).unwrap());
        assert!(gibbs_ct_chain(&sys, &[f64::INFINITY], &cfg, 1, &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }
}
