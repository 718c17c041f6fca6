#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + FD_STEP;
            let up = f(&y);
            y[i] = x[i] - FD_STEP;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn normal_vec<R: Rng>(rng: &mut R, centre: &[f64], sd: f64) -> Vec<f64> {
    centre.iter().map(|c| c + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// One-sample Kolmogorov–Smirnov statistic against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(mut samples: Vec<f64>, cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_se(v: &[f64], batches: usize) -> f64 {
    let size = v.len() / batches;
    let means: Vec<f64> = v.chunks_exact(size).take(batches).map(mean).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Energy distance between two samples of points.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let avg = |u: &[Vec<f64>], v: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in u {
            for y in v {
                s += dist(x, y);
            }
        }
        s / (u.len() * v.len()) as f64
    };
    2.0 * avg(a, b) - avg(a, a) - avg(b, b)
}

/// Permutation p-value of the energy distance between `a` and `b`.
pub fn energy_test<R: Rng>(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, rng: &mut R) -> f64 {
    use rand::seq::SliceRandom;
    let observed = energy_distance(a, b);
    let mut pooled: Vec<Vec<f64>> = a.iter().chain(b).cloned().collect();
    let mut exceed = 0;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        let (x, y) = pooled.split_at(a.len());
        if energy_distance(x, y) >= observed {
            exceed += 1;
        }
    }
    (exceed + 1) as f64 / (permutations + 1) as f64
}
