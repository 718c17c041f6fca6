//! Boltzmann machine relaxations with enumerated ground truth: every sampler
//! is scored against the exact moments, relative to the base approximation.

use std::path::Path;
use std::time::Instant;

use ctmc::basefit::{fit_local_approxes, moment_matched_base, MixtureApprox};
use ctmc::estimators::EstimateReport;
use ctmc::model::{
    bm_exhaustive_oracle, generate_bm_params, matrix_to_rows, relaxation_from_bm, relaxation_true_moments, BaseDensity,
    BmOracle, BoltzmannMachine, GaussianDensity, ModelDoc, Potential, RelaxationModel, RelaxationMoments,
};
use ctmc::tempering::{SystemDoc, TemperedSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, RelaxationSettings};
use crate::error::{BenchError, Result};
use crate::io::{cell_rng, csv_writer, write_json, write_text};
use crate::pipeline::{ais_runs, Run, RunSpec};
use crate::pool::worker_pool;

/// Stream reserved for base fitting, disjoint from every cell stream.
const BASEFIT_STREAM: u64 = u64::MAX;

pub type RelaxationSystem = TemperedSystem<RelaxationModel, GaussianDensity>;

/// Exact moments of a Boltzmann machine and of its relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDoc {
    #[serde(rename = "log_Z_B")]
    pub log_z_b: f64,
    pub mean_s: Vec<f64>,
    pub second_moment_s: Vec<Vec<f64>>,
    pub relaxation: MomentsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsDoc {
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl OracleDoc {
    pub fn new(oracle: &BmOracle, moments: &RelaxationMoments) -> Self {
        Self {
            log_z_b: oracle.log_z_b,
            mean_s: oracle.mean_s.clone(),
            second_moment_s: matrix_to_rows(&oracle.second_moment_s),
            relaxation: MomentsDoc {
                log_z: moments.log_z,
                mean: moments.mean.clone(),
                cov: matrix_to_rows(&moments.cov),
            },
        }
    }
}

/// Absolute errors of one estimate: `|log Ẑ - log Z|` and the root mean
/// square error over mean coordinates and covariance entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    pub mean: f64,
    pub cov: f64,
}

impl Errors {
    pub fn of(log_z: Option<f64>, mean: &[f64], cov: &[Vec<f64>], truth: &MomentsDoc) -> Self {
        let mean_err: Vec<f64> = mean.iter().zip(&truth.mean).map(|(a, b)| a - b).collect();
        let cov_err: Vec<f64> =
            cov.iter().zip(&truth.cov).flat_map(|(r, t)| r.iter().zip(t).map(|(a, b)| a - b)).collect();
        Self {
            log_z: log_z.map_or(f64::NAN, |l| (l - truth.log_z).abs()),
            mean: rms(&mean_err),
            cov: rms(&cov_err),
        }
    }

    pub fn of_report(report: &EstimateReport, truth: &MomentsDoc) -> Self {
        Self::of(report.log_z_hat, &report.mean_hat, &report.cov_hat, truth)
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self { log_z: f(self.log_z), mean: f(self.mean), cov: f(self.cov) }
    }
}

/// Root mean square, scaled by the largest magnitude so that equal inputs
/// return their magnitude exactly.
pub fn rms(values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if values.is_empty() || scale == 0.0 || !scale.is_finite() {
        return if values.iter().any(|v| v.is_nan()) { f64::NAN } else { scale };
    }
    scale * (values.iter().map(|v| (v / scale).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn ratio(err: f64, base: f64) -> f64 {
    if base == 0.0 && err == 0.0 {
        1.0
    } else {
        err / base
    }
}

/// One generated parameter set with its ground truth and fitted base.
pub struct ParameterSet {
    pub index: usize,
    pub bm: BoltzmannMachine,
    pub oracle: OracleDoc,
    pub mixture: MixtureApprox,
    pub system: RelaxationSystem,
    pub base_errors: Errors,
}

pub fn prepare_set(settings: &RelaxationSettings, index: usize, control_mass: f64) -> Result<ParameterSet> {
    let r = settings;
    let bm = generate_bm_params(index as u64, r.n_units, r.s1, r.s2, r.bias_scale)?;
    prepare_from_bm(settings, index, bm, control_mass)
}

/// Mixture of local approximations and its moment-matched Gaussian base,
/// drawn from the base-fitting stream of `seed`.
pub fn fit_base(settings: &RelaxationSettings, relaxation: &RelaxationModel, seed: u64) -> Result<(MixtureApprox, GaussianDensity, f64)> {
    let mut rng = cell_rng(seed, BASEFIT_STREAM);
    let locals = fit_local_approxes(relaxation, settings.n_inits, settings.mc_samples, &mut rng)?;
    let mixture = MixtureApprox::new(locals)?;
    let (base, log_zeta) = moment_matched_base(&mixture)?;
    Ok((mixture, base, log_zeta))
}

/// Enumerates the truth, fits the mixture of local approximations and builds
/// the tempered system with the moment-matched Gaussian base.
pub fn prepare_from_bm(settings: &RelaxationSettings, index: usize, bm: BoltzmannMachine, control_mass: f64) -> Result<ParameterSet> {
    let relaxation = relaxation_from_bm(&bm, settings.eps)?;
    let exact = bm_exhaustive_oracle(&bm)?;
    let oracle = OracleDoc::new(&exact, &relaxation_true_moments(&relaxation, &exact)?);
    let (mixture, base, log_zeta) = fit_base(settings, &relaxation, index as u64)?;
    let base_errors = Errors::of(Some(log_zeta), &base.mean(), &matrix_to_rows(&base.covariance()), &oracle.relaxation);
    let dim = relaxation.dim();
    let system = TemperedSystem::new(relaxation, base, log_zeta)?.with_masses(vec![1.0; dim], control_mass)?;
    Ok(ParameterSet { index, bm, oracle, mixture, system, base_errors })
}

/// A scored sampler configuration; AIS appears once per schedule length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub method: Method,
    pub temperatures: Option<usize>,
    pub slot: u64,
}

impl Arm {
    pub fn label(&self) -> String {
        match self.temperatures {
            Some(t) => format!("{}_{t}", self.method.name()),
            None => self.method.name().to_string(),
        }
    }
}

pub fn arms(cfg: &ExperimentConfig) -> Result<Vec<Arm>> {
    let mut out = Vec::new();
    for &method in cfg.samplers.keys() {
        match method {
            Method::Hmc => return Err(BenchError::Usage("plain HMC has no log Z estimate; drop it from the relaxation samplers".into())),
            Method::Ais => out.extend(cfg.ais_temperatures.iter().map(|&t| (method, Some(t)))),
            _ => out.push((method, None)),
        }
    }
    Ok(out.into_iter().enumerate().map(|(i, (method, temperatures))| Arm { method, temperatures, slot: i as u64 }).collect())
}

/// Errors of one (set, seed, arm) at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub set: usize,
    pub seed: u64,
    pub method: String,
    pub checkpoint: usize,
    /// Chain samples, or AIS runs times temperatures.
    pub samples: usize,
    #[serde(flatten)]
    pub errors: Errors,
    #[serde(skip)]
    pub seconds: f64,
}

/// Budget at each checkpoint in units of the arm's run: chain samples, or
/// AIS runs.
pub fn checkpoint_counts(total: usize, fractions: &[f64]) -> Vec<usize> {
    fractions.iter().map(|f| ((f * total as f64).ceil() as usize).clamp(1, total)).collect()
}

fn run_cell(cfg: &ExperimentConfig, set: &ParameterSet, seed: u64, arm: Arm) -> Result<Vec<CellResult>> {
    let spec = RunSpec {
        method: arm.method,
        hmc: cfg.settings(arm.method)?.hmc(seed),
        st_levels: cfg.st_levels,
        ais_temperatures: arm.temperatures.unwrap_or(2),
    };
    let (total, unit) = match arm.temperatures {
        Some(t) => (ais_runs(cfg.n_samples, t), t),
        None => (cfg.n_samples, 1),
    };
    let system = &set.system;
    let init = system.base().mean();
    let mut rng = cell_rng(seed, ((set.index as u64) << 8) | arm.slot);
    let mut run: Option<Run> = None;
    let mut seconds = 0.0;
    let mut out = Vec::new();
    for (checkpoint, &count) in checkpoint_counts(total, &cfg.checkpoints).iter().enumerate() {
        let have = run.as_ref().map_or(0, Run::len);
        if count > have {
            let start = Instant::now();
            let next = spec.run(system, &init, run.as_ref(), count - have, &mut rng)?;
            seconds += start.elapsed().as_secs_f64();
            match run.as_mut() {
                Some(r) => r.extend(next),
                None => run = Some(next),
            }
        }
        let current = run.as_ref().expect("checkpoints are at least one sample");
        let report = spec.report(current, cfg.burn_in, system.log_zeta(), None)?;
        out.push(CellResult {
            set: set.index,
            seed,
            method: arm.label(),
            checkpoint,
            samples: count * unit,
            errors: Errors::of_report(&report, &set.oracle.relaxation),
            seconds,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub method: String,
    pub checkpoint: usize,
    pub samples: usize,
    pub rmse_log_z: f64,
    pub rmse_mean: f64,
    pub rmse_cov: f64,
    pub rel_log_z: f64,
    pub rel_mean: f64,
    pub rel_cov: f64,
}

/// For every arm and checkpoint: per set, the RMSE over seeds divided by the
/// base approximation's error on that set, then averaged over sets. The
/// absolute RMSE columns are the same set averages before normalising.
pub fn rmse_table(cells: &[CellResult], base_errors: &[Errors]) -> Vec<RmseRow> {
    let mut keys: Vec<(String, usize, usize)> = Vec::new();
    for c in cells {
        let k = (c.method.clone(), c.checkpoint, c.samples);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let n_sets = base_errors.len() as f64;
    let mut rows = vec![RmseRow {
        method: "base".into(),
        checkpoint: 0,
        samples: 0,
        rmse_log_z: base_errors.iter().map(|e| e.log_z).sum::<f64>() / n_sets,
        rmse_mean: base_errors.iter().map(|e| e.mean).sum::<f64>() / n_sets,
        rmse_cov: base_errors.iter().map(|e| e.cov).sum::<f64>() / n_sets,
        rel_log_z: 1.0,
        rel_mean: 1.0,
        rel_cov: 1.0,
    }];
    for (method, checkpoint, samples) in keys {
        let mut abs = Errors { log_z: 0.0, mean: 0.0, cov: 0.0 };
        let mut rel = abs;
        for (set, base) in base_errors.iter().enumerate() {
            let errs: Vec<Errors> = cells
                .iter()
                .filter(|c| c.set == set && c.method == method && c.checkpoint == checkpoint)
                .map(|c| c.errors)
                .collect();
            let per_set = Errors {
                log_z: rms(&errs.iter().map(|e| e.log_z).collect::<Vec<_>>()),
                mean: rms(&errs.iter().map(|e| e.mean).collect::<Vec<_>>()),
                cov: rms(&errs.iter().map(|e| e.cov).collect::<Vec<_>>()),
            };
            abs = Errors { log_z: abs.log_z + per_set.log_z, mean: abs.mean + per_set.mean, cov: abs.cov + per_set.cov };
            rel = Errors {
                log_z: rel.log_z + ratio(per_set.log_z, base.log_z),
                mean: rel.mean + ratio(per_set.mean, base.mean),
                cov: rel.cov + ratio(per_set.cov, base.cov),
            };
        }
        let abs = abs.map(|v| v / n_sets);
        let rel = rel.map(|v| v / n_sets);
        rows.push(RmseRow {
            method,
            checkpoint,
            samples,
            rmse_log_z: abs.log_z,
            rmse_mean: abs.mean,
            rmse_cov: abs.cov,
            rel_log_z: rel.log_z,
            rel_mean: rel.mean,
            rel_cov: rel.cov,
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set: usize,
    pub n_units: usize,
    pub dim: usize,
    pub n_locals: usize,
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    pub log_zeta: f64,
    pub base_errors: Errors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSummary {
    pub sets: Vec<SetSummary>,
    pub table: Vec<RmseRow>,
    #[serde(skip)]
    pub cells: Vec<CellResult>,
}

impl RelaxationSummary {
    /// Table row of an arm at its final checkpoint.
    pub fn final_row(&self, method: &str) -> Option<&RmseRow> {
        self.table.iter().filter(|r| r.method == method).max_by_key(|r| r.checkpoint)
    }
}

/// Generates the parameter sets, enumerates their truth, fits bases, runs
/// every arm for every set and seed, and writes the tables.
pub fn run_relaxation(cfg: &ExperimentConfig, out: &Path, record_timings: bool) -> Result<RelaxationSummary> {
    cfg.validate()?;
    let settings = &cfg.relaxation;
    if settings.n_units > ctmc::model::MAX_ENUMERATION_UNITS {
        return Err(ctmc::Error::SizeLimit { dim: settings.n_units, max: ctmc::model::MAX_ENUMERATION_UNITS }.into());
    }
    let arms = arms(cfg)?;
    let pool = worker_pool()?;
    let sets = pool
        .install(|| (0..settings.n_sets).into_par_iter().map(|k| prepare_set(settings, k, cfg.control_mass)).collect::<Vec<_>>())
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut keys = Vec::new();
    for set in &sets {
        for &seed in &cfg.seeds {
            for &arm in &arms {
                keys.push((set, seed, arm));
            }
        }
    }
    let cells: Vec<CellResult> = pool
        .install(|| keys.par_iter().map(|&(set, seed, arm)| run_cell(cfg, set, seed, arm)).collect::<Vec<_>>())
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let base_errors: Vec<Errors> = sets.iter().map(|s| s.base_errors).collect();
    let table = rmse_table(&cells, &base_errors);
    let set_summaries: Vec<SetSummary> = sets
        .iter()
        .map(|s| SetSummary {
            set: s.index,
            n_units: s.bm.n_units(),
            dim: s.system.dim(),
            n_locals: s.mixture.locals.len(),
            log_z: s.oracle.relaxation.log_z,
            log_zeta: s.system.log_zeta(),
            base_errors: s.base_errors,
        })
        .collect();

    write_json(&out.join("config.json"), cfg)?;
    for s in &sets {
        let dir = out.join("sets").join(format!("set{}", s.index));
        write_text(&dir.join("bm.json"), &(ModelDoc::from(&s.bm).to_json() + "\n"))?;
        write_json(&dir.join("oracle.json"), &s.oracle)?;
        write_json(&dir.join("base_fit.json"), &s.mixture)?;
        let doc = SystemDoc::describe(&s.system, ModelDoc::from(s.system.target()), ModelDoc::from(s.system.base()));
        write_text(&dir.join("system.json"), &(doc.to_json() + "\n"))?;
    }
    let mut w = csv_writer(&out.join("sets.csv"))?;
    w.write_record(["set", "n_units", "dim", "n_locals", "log_Z", "log_zeta", "base_err_log_Z", "base_err_mean", "base_err_cov"])?;
    for s in &set_summaries {
        w.write_record([
            s.set.to_string(),
            s.n_units.to_string(),
            s.dim.to_string(),
            s.n_locals.to_string(),
            s.log_z.to_string(),
            s.log_zeta.to_string(),
            s.base_errors.log_z.to_string(),
            s.base_errors.mean.to_string(),
            s.base_errors.cov.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv_writer(&out.join("cells.csv"))?;
    w.write_record(["set", "seed", "method", "checkpoint", "samples", "err_log_Z", "err_mean", "err_cov"])?;
    for c in &cells {
        w.write_record([
            c.set.to_string(),
            c.seed.to_string(),
            c.method.clone(),
            c.checkpoint.to_string(),
            c.samples.to_string(),
            c.errors.log_z.to_string(),
            c.errors.mean.to_string(),
            c.errors.cov.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv_writer(&out.join("rmse_table.csv"))?;
    w.write_record(["method", "checkpoint", "samples", "rmse_log_Z", "rmse_mean", "rmse_cov", "rel_log_Z", "rel_mean", "rel_cov"])?;
    for r in &table {
        w.write_record([
            r.method.clone(),
            r.checkpoint.to_string(),
            r.samples.to_string(),
            r.rmse_log_z.to_string(),
            r.rmse_mean.to_string(),
            r.rmse_cov.to_string(),
            r.rel_log_z.to_string(),
            r.rel_mean.to_string(),
            r.rel_cov.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;

    if record_timings {
        let mut w = csv_writer(&out.join("timings.csv"))?;
        w.write_record(["set", "seed", "method", "checkpoint", "samples", "seconds"])?;
        for c in &cells {
            w.write_record([
                c.set.to_string(),
                c.seed.to_string(),
                c.method.clone(),
                c.checkpoint.to_string(),
                c.samples.to_string(),
                c.seconds.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
    }

    let summary = RelaxationSummary { sets: set_summaries, table, cells };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(v: f64) -> Errors {
        Errors { log_z: v, mean: 2.0 * v, cov: 3.0 * v }
    }

    #[test]
    fn rms_of_equal_values_is_exact() {
        for v in [0.1, 0.3, 1.0 / 3.0, 7e-5, 12.345] {
            assert_eq!(rms(&[v, -v, v, v, -v]), v);
        }
        assert_eq!(rms(&[3.0, 4.0]), (12.5f64).sqrt());
        assert_eq!(rms(&[]), 0.0);
        assert!(rms(&[1.0, f64::NAN]).is_nan());
    }

    #[test]
    fn base_moments_score_one_everywhere() {
        let base = vec![errors(0.3), errors(1.0 / 7.0), errors(2.5)];
        let mut cells = Vec::new();
        for (set, b) in base.iter().enumerate() {
            for seed in 0..5 {
                for checkpoint in 0..3 {
                    cells.push(CellResult {
                        set,
                        seed,
                        method: "joint_ct".into(),
                        checkpoint,
                        samples: 10 << checkpoint,
                        errors: *b,
                        seconds: 0.0,
                    });
                }
            }
        }
        let table = rmse_table(&cells, &base);
        assert_eq!(table.len(), 4);
        for r in &table {
            assert_eq!((r.rel_log_z, r.rel_mean, r.rel_cov), (1.0, 1.0, 1.0), "{r:?}");
        }
    }

    #[test]
    fn checkpoint_counts_are_clamped_prefixes() {
        assert_eq!(checkpoint_counts(100_000, &[0.125, 0.25, 0.5, 1.0]), vec![12_500, 25_000, 50_000, 100_000]);
        assert_eq!(checkpoint_counts(3, &[0.01, 1.0]), vec![1, 3]);
    }

    #[test]
    fn arms_expand_ais_schedules() {
        let cfg = ExperimentConfig::relaxation();
        let labels: Vec<String> = arms(&cfg).unwrap().iter().map(Arm::label).collect();
        assert_eq!(labels, ["joint_ct", "gibbs_ct", "st", "ais_50", "ais_200", "ais_1000"]);
        let mut bad = cfg.clone();
        bad.samplers.insert(Method::Hmc, crate::config::SamplerSettings::new(0.1, 5));
        assert!(arms(&bad).is_err());
    }

    #[test]
    fn zero_coupling_instance_recovers_log_z() {
        let n = 6;
        let biases = vec![0.3, -0.2, 0.1, 0.0, 0.25, -0.4];
        let bm = BoltzmannMachine::new(ctmc::model::rows_to_matrix(&vec![vec![0.0; n]; n]).unwrap(), biases.clone()).unwrap();
        let settings = RelaxationSettings { n_units: n, n_inits: 10, mc_samples: 200, ..RelaxationSettings::default() };
        let set = prepare_from_bm(&settings, 0, bm, 1.0).unwrap();
        let closed: f64 = biases.iter().map(|b: &f64| (2.0 * b.cosh()).ln()).sum();
        assert!((set.oracle.log_z_b - closed).abs() < 1e-12);
        let mut cfg = ExperimentConfig::relaxation();
        cfg.n_samples = 4000;
        cfg.ais_temperatures = vec![50];
        cfg.checkpoints = vec![1.0];
        for arm in arms(&cfg).unwrap() {
            let res = run_cell(&cfg, &set, 1, arm).unwrap();
            let err = res[0].errors.log_z;
            assert!(err < 0.02, "{}: {err}", arm.label());
        }
    }
}
