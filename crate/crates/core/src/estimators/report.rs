use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    batch_statistic_se, ct_log_weights, ct_log_z, mcse_batch_means, normalised_weights, st_log_weights, st_log_z,
    weighted_moments, Which,
};
use crate::error::{Error, Result};
use crate::math::LogAccumulator;
use crate::model::{matrix_to_rows, BaseDensity};
use crate::samplers::{TemperatureSchedule, TraceRecord};

/// Batch-means standard errors of the reported estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcse {
    #[serde(rename = "log_Z")]
    pub log_z: Option<f64>,
    pub mean: Option<Vec<f64>>,
}

/// Base-expectation convergence check: base moments recovered from the trace
/// against the known ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCheck {
    pub mean_error: Vec<f64>,
    pub mean_mcse: Option<Vec<f64>>,
    /// Largest `|error| / mcse` over coordinates.
    pub max_z: Option<f64>,
    pub cov_max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(rename = "log_Z_hat")]
    pub log_z_hat: Option<f64>,
    pub mean_hat: Vec<f64>,
    pub cov_hat: Vec<Vec<f64>>,
    pub mcse: Mcse,
    pub base_check: Option<BaseCheck>,
    #[serde(rename = "log_Z_count", default, skip_serializing_if = "Option::is_none")]
    pub log_z_count: Option<f64>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl EstimateReport {
    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.mean_hat.len();
        DMatrix::from_fn(d, d, |i, j| self.cov_hat[i][j])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn nonempty(records: &[TraceRecord]) -> Result<()> {
    if records.is_empty() {
        Err(Error::Usage("cannot estimate from an empty trace".into()))
    } else {
        Ok(())
    }
}

/// Continuous-tempering report. With `base`, also recovers the base moments
/// through the `w0` weights and compares them with the known values.
pub fn ct_report(records: &[TraceRecord], log_zeta: f64, base: Option<&dyn BaseDensity>) -> Result<EstimateReport> {
    nonempty(records)?;
    let log_z = ct_log_z(records, log_zeta)?;
    let (mean, cov) = weighted_moments(records, &ct_log_weights(records, Which::Target)?)?;
    let mcse_log_z = batch_statistic_se(records, None, |b| Ok(vec![ct_log_z(b, log_zeta)?])).ok().map(|v| v[0]);
    let mcse_mean = batch_statistic_se(records, None, |b| Ok(weighted_moments(b, &ct_log_weights(b, Which::Target)?)?.0)).ok();
    let base_check = match base {
        None => None,
        Some(base) => {
            let (bmean, bcov) = weighted_moments(records, &ct_log_weights(records, Which::Base)?)?;
            let mean_error: Vec<f64> = bmean.iter().zip(base.mean()).map(|(a, b)| a - b).collect();
            let mean_mcse = batch_statistic_se(records, None, |b| Ok(weighted_moments(b, &ct_log_weights(b, Which::Base)?)?.0)).ok();
            let max_z = mean_mcse
                .as_ref()
                .map(|se| mean_error.iter().zip(se).map(|(e, s)| e.abs() / s).fold(0.0, f64::max));
            let cov_max_abs_error = (bcov - base.covariance()).abs().max();
            Some(BaseCheck { mean_error, mean_mcse, max_z, cov_max_abs_error })
        }
    };
    let mut diagnostics = Vec::new();
    if !log_z.is_finite() {
        diagnostics.push(format!("log Z estimate is not finite ({log_z})"));
    }
    Ok(EstimateReport {
        log_z_hat: finite(log_z),
        mean_hat: mean,
        cov_hat: matrix_to_rows(&cov),
        mcse: Mcse { log_z: mcse_log_z, mean: mcse_mean },
        base_check,
        log_z_count: None,
        n_samples: records.len(),
        diagnostics,
    })
}

/// Simulated-tempering report: Rao-Blackwellised `log Z` as the headline,
/// count-based alongside, and target moments weighted by `p(β_N | x)`.
pub fn st_report(records: &[TraceRecord], schedule: &TemperatureSchedule, log_zeta: f64) -> Result<EstimateReport> {
    nonempty(records)?;
    let est = st_log_z(records, schedule, log_zeta)?;
    let (mean, cov) = weighted_moments(records, &st_log_weights(records, schedule)?)?;
    let mcse_log_z = batch_statistic_se(records, None, |b| Ok(vec![st_log_z(b, schedule, log_zeta)?.rao_blackwell.value])).ok().map(|v| v[0]);
    let mcse_mean = batch_statistic_se(records, None, |b| Ok(weighted_moments(b, &st_log_weights(b, schedule)?)?.0)).ok();
    let diagnostics = [&est.rao_blackwell, &est.count_based].iter().filter_map(|f| f.diagnostic.clone()).collect();
    Ok(EstimateReport {
        log_z_hat: est.rao_blackwell.is_finite().then_some(est.rao_blackwell.value),
        mean_hat: mean,
        cov_hat: matrix_to_rows(&cov),
        mcse: Mcse { log_z: mcse_log_z, mean: mcse_mean },
        base_check: None,
        log_z_count: est.count_based.is_finite().then_some(est.count_based.value),
        n_samples: records.len(),
        diagnostics,
    })
}

/// Unweighted moments for chains that target `φ` directly.
pub fn plain_report(records: &[TraceRecord]) -> Result<EstimateReport> {
    nonempty(records)?;
    let d = records[0].x.len();
    let (mean, cov) = weighted_moments(records, &vec![0.0; records.len()])?;
    let mcse_mean = (0..d)
        .map(|j| mcse_batch_means(&records.iter().map(|r| r.x[j]).collect::<Vec<_>>(), None))
        .collect::<Result<Vec<_>>>()
        .ok();
    Ok(EstimateReport {
        log_z_hat: None,
        mean_hat: mean,
        cov_hat: matrix_to_rows(&cov),
        mcse: Mcse { log_z: None, mean: mcse_mean },
        base_check: None,
        log_z_count: None,
        n_samples: records.len(),
        diagnostics: vec!["untempered chain: no normalising-constant estimate".into()],
    })
}

/// Annealed importance sampling report from `(final state, log weight)` runs.
/// The `log Z` standard error is the delta-method error of the weight mean.
pub fn ais_report(runs: &[(Vec<f64>, f64)]) -> Result<EstimateReport> {
    if runs.is_empty() {
        return Err(Error::Usage("no AIS runs".into()));
    }
    let log_weights: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let records: Vec<TraceRecord> = runs
        .iter()
        .enumerate()
        .map(|(i, (x, _))| TraceRecord { iter: i, beta: 1.0, u: None, delta: None, hamiltonian: f64::NAN, accepted: true, x: x.clone() })
        .collect();
    let mut acc = LogAccumulator::new();
    for &l in &log_weights {
        acc.push(l);
    }
    let log_z = acc.log_mean();
    let (mean, cov) = weighted_moments(&records, &log_weights)?;
    let n = runs.len() as f64;
    let mcse_log_z = if runs.len() > 1 {
        let w = normalised_weights(&log_weights)?;
        let var = w.iter().map(|w| (n * w - 1.0).powi(2)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    } else {
        None
    };
    Ok(EstimateReport {
        log_z_hat: finite(log_z),
        mean_hat: mean,
        cov_hat: matrix_to_rows(&cov),
        mcse: Mcse { log_z: mcse_log_z, mean: None },
        base_check: None,
        log_z_count: None,
        n_samples: runs.len(),
        diagnostics: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_names() {
        let rec: Vec<TraceRecord> = (0..16)
            .map(|i| TraceRecord { iter: i, beta: 0.5, u: None, delta: Some(0.1 * i as f64), hamiltonian: 0.0, accepted: true, x: vec![i as f64, 1.0] })
            .collect();
        let r = ct_report(&rec, 0.0, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["log_Z_hat", "mean_hat", "cov_hat", "mcse", "base_check"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(r.cov_hat[0][1], r.cov_hat[1][0]);
        let back: EstimateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn ais_report_equal_weights() {
        let runs = vec![(vec![1.0], 0.0), (vec![3.0], 0.0)];
        let r = ais_report(&runs).unwrap();
        assert_eq!(r.log_z_hat, Some(0.0));
        assert_eq!(r.mean_hat, vec![2.0]);
        assert_eq!(r.mcse.log_z, Some(0.0));
    }
}
