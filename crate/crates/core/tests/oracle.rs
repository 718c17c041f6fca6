mod common;

use common::rng;
use ctmc::model::{
    bm_exhaustive_oracle, generate_bm_params, relaxation_from_bm, relaxation_true_moments, BoltzmannMachine, Potential,
    MAX_ENUMERATION_UNITS,
};
use ctmc::Error;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// States in binary order with their direct log-weights `½ sᵀWs + bᵀs`.
fn naive_states(bm: &BoltzmannMachine) -> Vec<(Vec<f64>, f64)> {
    let n = bm.n_units();
    let (w, b) = (bm.weights(), bm.biases());
    (0..1u32 << n)
        .map(|code| {
            let s: Vec<f64> = (0..n).map(|i| if code >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let mut e = 0.0;
            for i in 0..n {
                e += b[i] * s[i];
                for j in 0..n {
                    e += 0.5 * w[(i, j)] * s[i] * s[j];
                }
            }
            (s, e)
        })
        .collect()
}

fn naive_log_z(states: &[(Vec<f64>, f64)]) -> f64 {
    let max = states.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    max + states.iter().map(|(_, e)| (e - max).exp()).sum::<f64>().ln()
}

#[test]
fn oracle_matches_naive_enumeration() {
    for n in 2..=8 {
        for seed in 0..4 {
            let bm = generate_bm_params(seed * 31 + n as u64, n, 6.0, 2.0, 0.1).unwrap();
            let states = naive_states(&bm);
            let log_z = naive_log_z(&states);
            let oracle = bm_exhaustive_oracle(&bm).unwrap();
            assert!((oracle.log_z_b - log_z).abs() < 1e-10, "n = {n}: {} vs {log_z}", oracle.log_z_b);

            let mut mean = vec![0.0; n];
            let mut second = DMatrix::<f64>::zeros(n, n);
            for (s, e) in &states {
                let p = (e - log_z).exp();
                for i in 0..n {
                    mean[i] += p * s[i];
                    for j in 0..n {
                        second[(i, j)] += p * s[i] * s[j];
                    }
                }
            }
            for i in 0..n {
                assert!((oracle.mean_s[i] - mean[i]).abs() < 1e-10);
                for j in 0..n {
                    assert!((oracle.second_moment_s[(i, j)] - second[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn oracle_invariants() {
    for seed in 0..5 {
        let bm = generate_bm_params(seed, 12, 6.0, 2.0, 0.1).unwrap();
        let oracle = bm_exhaustive_oracle(&bm).unwrap();
        let second = &oracle.second_moment_s;
        for i in 0..12 {
            assert_eq!(second[(i, i)], 1.0);
            assert!(oracle.mean_s[i].abs() <= 1.0);
            for j in 0..12 {
                assert_eq!(second[(i, j)], second[(j, i)]);
                assert!(second[(i, j)].abs() <= 1.0 + 1e-12);
            }
        }
        let lambda_min = second.clone().symmetric_eigenvalues().min();
        assert!(lambda_min > -1e-10, "E[ssᵀ] not PSD: {lambda_min}");
    }
}

#[test]
fn oracle_refuses_oversized_machines() {
    let n = MAX_ENUMERATION_UNITS + 1;
    let bm = BoltzmannMachine::new(DMatrix::zeros(n, n), vec![0.0; n]).unwrap();
    assert!(matches!(bm_exhaustive_oracle(&bm), Err(Error::SizeLimit { .. })));
}

#[test]
fn generated_parameters_are_seed_deterministic() {
    let a = generate_bm_params(9, 12, 6.0, 2.0, 0.1).unwrap();
    let b = generate_bm_params(9, 12, 6.0, 2.0, 0.1).unwrap();
    let c = generate_bm_params(10, 12, 6.0, 2.0, 0.1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

/// Draws from the relaxation by its latent-variable construction: `s` from the
/// enumerated Boltzmann probabilities, then `x ~ N(Qᵀs, I)`.
#[test]
fn relaxation_moments_match_ancestral_sampling() {
    let n = 6;
    let bm = generate_bm_params(3, n, 6.0, 2.0, 0.1).unwrap();
    let model = relaxation_from_bm(&bm, 1e-6).unwrap();
    let truth = relaxation_true_moments(&model, &bm_exhaustive_oracle(&bm).unwrap()).unwrap();
    let q = model.q();
    let d = q.ncols();

    let states = naive_states(&bm);
    let log_z = naive_log_z(&states);
    let mut cdf = Vec::with_capacity(states.len());
    let mut total = 0.0;
    for (_, e) in &states {
        total += (e - log_z).exp();
        cdf.push(total);
    }

    let draws = 100_000;
    let mut r = rng(11);
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u: f64 = r.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c < u).min(states.len() - 1);
        let s = &states[k].0;
        let x: Vec<f64> = (0..d)
            .map(|c| (0..n).map(|i| q[(i, c)] * s[i]).sum::<f64>() + r.sample::<f64, _>(StandardNormal))
            .collect();
        xs.push(x);
    }

    let nf = draws as f64;
    let mean: Vec<f64> = (0..d).map(|c| xs.iter().map(|x| x[c]).sum::<f64>() / nf).collect();
    for c in 0..d {
        let se = (truth.cov[(c, c)] / nf).sqrt();
        assert!((mean[c] - truth.mean[c]).abs() < 4.0 * se, "mean {c}: {} vs {}", mean[c], truth.mean[c]);
    }
    for a in 0..d {
        for b in 0..=a {
            let prods: Vec<f64> = xs.iter().map(|x| (x[a] - truth.mean[a]) * (x[b] - truth.mean[b])).collect();
            let m = prods.iter().sum::<f64>() / nf;
            let v = prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (nf - 1.0);
            let se = (v / nf).sqrt();
            assert!((m - truth.cov[(a, b)]).abs() < 4.0 * se, "cov ({a}, {b}): {m} vs {}", truth.cov[(a, b)]);
        }
    }
}

/// Two units give a 2-D relaxation small enough to integrate `exp(-φ)` on a grid.
#[test]
fn relaxation_log_z_matches_grid_integration() {
    let bm = generate_bm_params(5, 2, 6.0, 2.0, 0.1).unwrap();
    let model = relaxation_from_bm(&bm, 1e-6).unwrap();
    assert_eq!(model.dim(), 2);
    let truth = relaxation_true_moments(&model, &bm_exhaustive_oracle(&bm).unwrap()).unwrap();

    let (lo, hi, k) = (-15.0, 15.0, 1501);
    let h = (hi - lo) / (k - 1) as f64;
    let mut sum = 0.0;
    let mut first = [0.0; 2];
    for i in 0..k {
        for j in 0..k {
            let x = [lo + i as f64 * h, lo + j as f64 * h];
            let p = (-model.potential(&x)).exp();
            sum += p;
            first[0] += p * x[0];
            first[1] += p * x[1];
        }
    }
    let log_z = (sum * h * h).ln();
    assert!((log_z - truth.log_z).abs() < 1e-8, "{log_z} vs {}", truth.log_z);
    for c in 0..2 {
        assert!((first[c] / sum - truth.mean[c]).abs() < 1e-8);
    }
}
