//! Normalising-constant and expectation estimators for tempered traces, and
//! quadrature checks of the β marginal for one-dimensional systems.

mod bounds;
mod report;

pub use bounds::{check_marginal_bounds, BoundPoint, BoundReport, QuadratureOracle, BOUND_TOLERANCE};
pub use report::{ais_report, ct_report, plain_report, st_report, BaseCheck, EstimateReport, Mcse};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::LogAccumulator;
use crate::samplers::{TemperatureSchedule, TraceRecord};
use crate::tempering::{log_w0, log_w1};

/// Fraction of each trace discarded before estimation unless configured.
pub const DEFAULT_BURN_IN: f64 = 0.1;

/// Which end of the bridge an expectation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Target,
    Base,
}

/// An estimate that may be non-finite, with the reason when it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl Flagged {
    fn checked(value: f64, what: &str) -> Self {
        let diagnostic = (!value.is_finite()).then(|| format!("{what} is not finite ({value})"));
        Self { value, diagnostic }
    }

    fn flagged(value: f64, diagnostic: String) -> Self {
        Self { value, diagnostic: Some(diagnostic) }
    }

    pub fn is_finite(&self) -> bool {
        self.diagnostic.is_none() && self.value.is_finite()
    }
}

/// `Δ(x_s)` for every record; traces from untempered samplers have none.
pub fn trace_deltas(records: &[TraceRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| r.delta.ok_or_else(|| Error::Usage(format!("record {} carries no Δ; not a tempered trace", r.iter))))
        .collect()
}

/// `log ζ + log Σ_s w1(Δ_s) - log Σ_s w0(Δ_s)`.
pub fn ct_log_z_from_deltas(deltas: &[f64], log_zeta: f64) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::Usage("cannot estimate from an empty trace".into()));
    }
    let mut num = LogAccumulator::new();
    let mut den = LogAccumulator::new();
    for &d in deltas {
        num.push(log_w1(d));
        den.push(log_w0(d));
    }
    Ok(log_zeta + num.log_sum() - den.log_sum())
}

pub fn ct_log_z(records: &[TraceRecord], log_zeta: f64) -> Result<f64> {
    ct_log_z_from_deltas(&trace_deltas(records)?, log_zeta)
}

/// Per-sample log importance weights for target or base expectations.
pub fn ct_log_weights(records: &[TraceRecord], which: Which) -> Result<Vec<f64>> {
    let deltas = trace_deltas(records)?;
    Ok(match which {
        Which::Target => deltas.iter().map(|&d| log_w1(d)).collect(),
        Which::Base => deltas.iter().map(|&d| log_w0(d)).collect(),
    })
}

/// Max-shifted, normalised weights.
pub fn normalised_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.is_empty() {
        return Err(Error::Usage("cannot estimate from an empty trace".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    Ok(w.into_iter().map(|w| w / total).collect())
}

/// Self-normalised importance average of `f` over the records.
pub fn weighted_expectation<F>(records: &[TraceRecord], log_weights: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    crate::error::check_dim(records.len(), log_weights.len())?;
    if records.is_empty() {
        return Err(Error::Usage("cannot estimate from an empty trace".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut total = 0.0;
    let mut acc: Vec<f64> = Vec::new();
    for (r, l) in records.iter().zip(log_weights) {
        let w = (l - max).exp();
        let v = f(&r.x);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        crate::error::check_dim(acc.len(), v.len())?;
        for (a, v) in acc.iter_mut().zip(&v) {
            *a += w * v;
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Rao-Blackwellised expectation under the target (weights `w1`) or the base
/// (weights `w0`).
pub fn ct_expectation<F>(records: &[TraceRecord], f: F, which: Which) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    weighted_expectation(records, &ct_log_weights(records, which)?, f)
}

/// Weighted mean and covariance of `x`.
pub fn weighted_moments(records: &[TraceRecord], log_weights: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = records.first().map_or(0, |r| r.x.len());
    let w = {
        crate::error::check_dim(records.len(), log_weights.len())?;
        normalised_weights(log_weights)?
    };
    let mut mean = vec![0.0; d];
    for (r, w) in records.iter().zip(&w) {
        for (m, x) in mean.iter_mut().zip(&r.x) {
            *m += w * x;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (r, w) in records.iter().zip(&w) {
        for i in 0..d {
            let di = r.x[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += w * di * (r.x[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok((mean, cov))
}

/// Simulated-tempering estimates of `log Z`:
/// `log ζ + w_0 - w_N + log P̂(β_N) - log P̂(β_0)`, with `P̂` from averaged
/// conditionals (Rao-Blackwellised) or from visit frequencies (count based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StEstimates {
    pub rao_blackwell: Flagged,
    pub count_based: Flagged,
}

pub fn st_log_z(records: &[TraceRecord], schedule: &TemperatureSchedule, log_zeta: f64) -> Result<StEstimates> {
    if records.is_empty() {
        return Err(Error::Usage("cannot estimate from an empty trace".into()));
    }
    let deltas = trace_deltas(records)?;
    let w = schedule.weights();
    let n = w.len() - 1;
    let offset = log_zeta + w[0] - w[n];

    let log_p = schedule.log_marginals(&deltas);
    let rb = offset + log_p[n] - log_p[0];
    let rao_blackwell = if log_p[0] == f64::NEG_INFINITY || log_p[n] == f64::NEG_INFINITY {
        Flagged::flagged(rb, "averaged conditional at an endpoint underflowed to zero".into())
    } else {
        Flagged::checked(rb, "Rao-Blackwellised estimate")
    };

    let visits0 = records.iter().filter(|r| r.beta == 0.0).count();
    let visits1 = records.iter().filter(|r| r.beta == 1.0).count();
    let count = offset + (visits1 as f64).ln() - (visits0 as f64).ln();
    let count_based = if visits0 == 0 || visits1 == 0 {
        Flagged::flagged(f64::NAN, format!("endpoint visits: β=0 {visits0} times, β=1 {visits1} times"))
    } else {
        Flagged::checked(count, "count-based estimate")
    };
    Ok(StEstimates { rao_blackwell, count_based })
}

/// Log weights of target expectations under simulated tempering: `log p(β_N | x_s)`.
pub fn st_log_weights(records: &[TraceRecord], schedule: &TemperatureSchedule) -> Result<Vec<f64>> {
    let n = schedule.len() - 1;
    Ok(trace_deltas(records)?.into_iter().map(|d| schedule.log_conditionals(d)[n]).collect())
}

/// `log((1/S) Σ_s exp(log_weight_s))`.
pub fn ais_log_z(log_weights: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(Error::Usage("no AIS weights".into()));
    }
    let mut acc = LogAccumulator::new();
    for &l in log_weights {
        acc.push(l);
    }
    Ok(acc.log_mean())
}

/// Rao-Blackwellised density of β at each grid point:
/// `(1/S) Σ_s w0(Δ_s) exp(-βΔ_s)`.
pub fn beta_marginal_rb(records: &[TraceRecord], beta_grid: &[f64]) -> Result<Vec<f64>> {
    let deltas = trace_deltas(records)?;
    if deltas.is_empty() {
        return Err(Error::Usage("cannot estimate from an empty trace".into()));
    }
    if let Some(b) = beta_grid.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::Domain(format!("grid point {b} is outside [0, 1]")));
    }
    let lw0: Vec<f64> = deltas.iter().map(|&d| log_w0(d)).collect();
    Ok(beta_grid
        .iter()
        .map(|&beta| {
            let mut acc = LogAccumulator::new();
            for (&d, &l) in deltas.iter().zip(&lw0) {
                acc.push(l - beta * d);
            }
            acc.log_mean().exp()
        })
        .collect())
}

/// Batch-means Monte Carlo standard error of the mean of `series`, with
/// `⌊√n⌋` batches by default. Trailing samples that do not fill a batch are
/// dropped.
pub fn mcse_batch_means(series: &[f64], n_batches: Option<usize>) -> Result<f64> {
    let n = series.len();
    let b = n_batches.unwrap_or((n as f64).sqrt().floor() as usize);
    if b < 2 || n < 2 * b {
        return Err(Error::Usage(format!("{n} samples are too few for {b} batches")));
    }
    let size = n / b;
    let means: Vec<f64> = series.chunks_exact(size).take(b).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    Ok((var / b as f64).sqrt())
}

/// Batch-means standard error of an arbitrary vector statistic: the spread of
/// the statistic recomputed on consecutive batches, divided by `√b`.
pub fn batch_statistic_se<F>(records: &[TraceRecord], n_batches: Option<usize>, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&[TraceRecord]) -> Result<Vec<f64>>,
{
    let n = records.len();
    let b = n_batches.unwrap_or((n as f64).sqrt().floor() as usize);
    if b < 2 || n < 2 * b {
        return Err(Error::Usage(format!("{n} samples are too few for {b} batches")));
    }
    let size = n / b;
    let values = records.chunks_exact(size).take(b).map(&stat).collect::<Result<Vec<_>>>()?;
    let k = values[0].len();
    Ok((0..k)
        .map(|j| {
            let m = values.iter().map(|v| v[j]).sum::<f64>() / b as f64;
            let var = values.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn records(deltas: &[f64]) -> Vec<TraceRecord> {
        deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| TraceRecord { iter: i, beta: 0.5, u: None, delta: Some(d), hamiltonian: 0.0, accepted: true, x: vec![i as f64] })
            .collect()
    }

    #[test]
    fn constant_delta_identity() {
        for c in [-3.0, 0.0, 1e-9, 2.0, 400.0] {
            let est = ct_log_z(&records(&[c; 7]), 1.25).unwrap();
            assert!((est - (1.25 - c)).abs() < 1e-12, "c = {c}: {est}");
        }
        assert!(ct_log_z(&[], 0.0).is_err());
    }

    #[test]
    fn self_normalisation() {
        let r = records(&[0.3, -2.0, 5.0, 40.0, -300.0]);
        for which in [Which::Target, Which::Base] {
            assert_eq!(ct_expectation(&r, |_| vec![1.0], which).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn degenerate_weights() {
        let r = records(&[0.0]);
        assert!(matches!(weighted_expectation(&r, &[f64::NEG_INFINITY], |x| x.to_vec()), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn ais_arithmetic() {
        assert_eq!(ais_log_z(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let v = ais_log_z(&[2f64.ln(), 0.5f64.ln()]).unwrap();
        assert!((v - 1.25f64.ln()).abs() < 1e-15);
        assert!(ais_log_z(&[]).is_err());
    }

    #[test]
    fn flat_beta_marginal_for_zero_delta() {
        let r = records(&[0.0; 5]);
        let p = beta_marginal_rb(&r, &[0.0, 0.3, 1.0]).unwrap();
        assert!(p.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(beta_marginal_rb(&r, &[1.5]).is_err());
    }

    #[test]
    fn beta_marginal_normalised_per_sample() {
        let r = records(&[-20.0, -1.0, 0.5, 6.0, 300.0]);
        let grid: Vec<f64> = (0..=20000).map(|i| i as f64 / 20000.0).collect();
        let p = beta_marginal_rb(&r, &grid).unwrap();
        let h = 1.0 / 20000.0;
        let integral = h * (p.iter().sum::<f64>() - 0.5 * (p[0] + p[20000]));
        // Δ = 300 puts almost all of its mass within 1/300 of β = 0
        assert!((integral - 1.0).abs() < 2e-3, "{integral}");
    }

    #[test]
    fn st_endpoints() {
        let s = TemperatureSchedule::linear(3).unwrap();
        let mut r = records(&[0.0; 10]);
        let est = st_log_z(&r, &s, 0.0).unwrap();
        assert!(!est.count_based.is_finite() && est.count_based.diagnostic.is_some());
        assert!(est.rao_blackwell.is_finite());
        assert!(est.rao_blackwell.value.abs() < 1e-14);
        r[0].beta = 0.0;
        r[1].beta = 1.0;
        let est = st_log_z(&r, &s, 0.0).unwrap();
        assert_eq!(est.count_based.value, 0.0);
    }

    #[test]
    fn mcse_cases() {
        assert_eq!(mcse_batch_means(&[3.0; 100], None).unwrap(), 0.0);
        assert!(mcse_batch_means(&[1.0; 3], None).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let iid: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let se = mcse_batch_means(&iid, None).unwrap();
        assert!((se / 0.01 - 1.0).abs() < 0.3, "{se}");
    }
}
