mod common;

use common::{batch_se, ks_statistic, mean, normal_vec, rng};
use ctmc::model::{BaseDensity, FnPotential, GaussianDensity};
use ctmc::samplers::{gibbs_ct_chain, joint_ct_chain, HmcConfig};
use ctmc::tempering::{beta, log_w0, log_w1, sample_beta_given_delta, ExtendedState, TemperedSystem};
use proptest::prelude::*;

/// CDF of `p(β) ∝ exp(-βΔ)` on `[0, 1]`.
fn conditional_cdf(delta: f64, b: f64) -> f64 {
    if delta == 0.0 {
        b
    } else {
        (-b * delta).exp_m1() / (-delta).exp_m1()
    }
}

/// Density of the same law evaluated directly.
fn conditional_pdf(delta: f64, b: f64) -> f64 {
    delta * (-b * delta).exp() / -(-delta).exp_m1()
}

proptest! {
    #[test]
    fn beta_lies_strictly_inside_unit_interval(u in -30.0f64..30.0) {
        let b = beta(u);
        prop_assert!(b > 0.0 && b < 1.0);
    }

    #[test]
    fn beta_is_antisymmetric_about_half(u in -700.0f64..700.0) {
        prop_assert!((beta(-u) - (1.0 - beta(u))).abs() < 1e-15);
    }

    #[test]
    fn weight_ratio_is_exp_minus_delta(delta in -500.0f64..500.0) {
        let diff = log_w1(delta) - log_w0(delta);
        prop_assert!((diff + delta).abs() < 1e-12 * (1.0 + delta.abs()));
    }

    #[test]
    fn weights_are_conditional_endpoint_densities(delta in -30.0f64..30.0) {
        prop_assume!(delta.abs() > 1e-6);
        let w0 = conditional_pdf(delta, 0.0);
        let w1 = conditional_pdf(delta, 1.0);
        prop_assert!((log_w0(delta) - w0.ln()).abs() < 1e-10);
        prop_assert!((log_w1(delta) - w1.ln()).abs() < 1e-10);
    }

    #[test]
    fn conditional_draws_stay_in_range(delta in -1e4f64..1e4, seed in 0u64..1000) {
        let mut r = rng(seed);
        for _ in 0..20 {
            let b = sample_beta_given_delta(delta, &mut r);
            prop_assert!((0.0..=1.0).contains(&b));
        }
    }
}

#[test]
fn weights_are_continuous_across_the_series_switch() {
    for d in [1e-8, -1e-8] {
        let below = d * (1.0 - 1e-9);
        let above = d * (1.0 + 1e-9);
        assert!((log_w0(below) - log_w0(above)).abs() < 1e-15);
        assert!((log_w1(below) - log_w1(above)).abs() < 1e-15);
    }
    assert!(log_w0(0.0).abs() < 1e-300 && log_w1(0.0).abs() < 1e-300);
}

#[test]
fn conditional_draws_pass_ks_test() {
    let draws = 100_000;
    for (k, delta) in [-20.0, -5.0, 0.0, 5.0, 20.0].into_iter().enumerate() {
        let mut r = rng(100 + k as u64);
        let samples: Vec<f64> = (0..draws).map(|_| sample_beta_given_delta(delta, &mut r)).collect();
        let ks = ks_statistic(samples, |b| conditional_cdf(delta, b));
        assert!(ks < 0.006, "Δ = {delta}: KS = {ks}");
    }
}

/// Unnormalised Gaussian target `½|x - m|²/s²` whose normaliser is known, with
/// the matching normalised Gaussian as base.
fn matched_system(
    d: usize,
    s: f64,
) -> TemperedSystem<FnPotential<impl Fn(&[f64]) -> f64 + Send + Sync, impl Fn(&[f64], &mut [f64]) + Send + Sync>, GaussianDensity>
{
    let m: Vec<f64> = (0..d).map(|i| 0.5 * i as f64 - 1.0).collect();
    let (m1, m2) = (m.clone(), m.clone());
    let s2 = s * s;
    let target = FnPotential::new(
        d,
        move |x: &[f64]| x.iter().zip(&m1).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * s2),
        move |x: &[f64], g: &mut [f64]| {
            for i in 0..x.len() {
                g[i] = (x[i] - m2[i]) / s2;
            }
        },
    );
    let log_z = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * s2).ln();
    let base = GaussianDensity::isotropic(m, s2).unwrap();
    TemperedSystem::new(target, base, log_z).unwrap()
}

#[test]
fn matched_base_separates_x_and_beta() {
    let system = matched_system(3, 1.3);
    let mut r = rng(5);
    for _ in 0..100 {
        let x = normal_vec(&mut r, &[0.0; 3], 3.0);
        assert!(system.delta(&x).abs() < 1e-12);
        let psi = system.base().neg_log_pdf(&x);
        for b in [0.0, 0.25, 0.5, 1.0] {
            let joint = system.joint_log_density_x_beta(&x, b).unwrap();
            assert!((joint + psi).abs() < 1e-12, "joint density depends on β");
        }
    }
}

#[test]
fn joint_chain_with_matched_base_has_uniform_beta() {
    let system = matched_system(2, 1.0);
    let cfg = HmcConfig::new(0.4, 8, 0);
    let trace = joint_ct_chain(&system, &ExtendedState::at(vec![0.0, 0.0], 0.0), &cfg, 100_000, &mut rng(6)).unwrap();
    let betas: Vec<f64> = trace.records.iter().map(|r| r.beta).collect();
    let squares: Vec<f64> = betas.iter().map(|b| b * b).collect();
    let (m, se) = (mean(&betas), batch_se(&betas, 50));
    assert!((m - 0.5).abs() < 4.0 * se, "E[β] = {m} ± {se}");
    let (m2, se2) = (mean(&squares), batch_se(&squares, 50));
    assert!((m2 - 1.0 / 3.0).abs() < 4.0 * se2, "E[β²] = {m2} ± {se2}");
    // occupancy of each tenth of [0, 1]
    for k in 0..10 {
        let hits: Vec<f64> = betas.iter().map(|&b| f64::from(u8::from((b * 10.0).floor() as usize == k))).collect();
        let (p, se) = (mean(&hits), batch_se(&hits, 50));
        assert!((p - 0.1).abs() < 4.0 * se, "bin {k}: {p} ± {se}");
    }
}

#[test]
fn gibbs_chain_with_matched_base_has_uniform_beta() {
    let system = matched_system(2, 1.0);
    let cfg = HmcConfig::new(0.4, 8, 0);
    let trace = gibbs_ct_chain(&system, &[0.0, 0.0], &cfg, 100_000, &mut rng(7)).unwrap();
    let betas: Vec<f64> = trace.records.iter().map(|r| r.beta).collect();
    let ks = ks_statistic(betas, |b| b);
    assert!(ks < 0.006, "KS = {ks}");
}
