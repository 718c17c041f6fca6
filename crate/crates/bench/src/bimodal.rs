//! Two well-separated modes in one dimension: plain HMC against the
//! continuous-tempering samplers.

use std::path::Path;
use std::time::Instant;

use ctmc::estimators::{
    beta_marginal_rb, check_marginal_bounds, ct_log_weights, normalised_weights, BoundReport, EstimateReport,
    QuadratureOracle, Which,
};
use ctmc::model::{BaseDensity, GaussianDensity, GaussianMixtureModel, ModelDoc, Potential};
use ctmc::quadrature::integrate;
use ctmc::samplers::TraceRecord;
use ctmc::tempering::{SystemDoc, TemperedSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BimodalSettings, ExperimentConfig, Method};
use crate::error::{BenchError, Result};
use crate::io::{cell_rng, csv_writer, write_json, write_text};
use crate::pipeline::{write_run, Run, RunSpec};
use crate::pool::worker_pool;

const QUAD_TOL: f64 = 1e-12;
/// Histogram range in component standard deviations beyond the outer means.
const HISTOGRAM_SDS: f64 = 5.0;

pub type BimodalSystem = TemperedSystem<GaussianMixtureModel, GaussianDensity>;

/// The mixture target with a Gaussian base matching its mean and variance,
/// and `ζ = Z = 1`.
pub fn bimodal_system(settings: &BimodalSettings, control_mass: f64) -> Result<BimodalSystem> {
    let b = settings;
    let target = GaussianMixtureModel::diagonal(
        b.weights.to_vec(),
        b.means.iter().map(|&m| vec![m]).collect(),
        b.sds.iter().map(|&s| vec![s * s]).collect(),
    )?;
    let base = GaussianDensity::new(target.mean(), target.covariance())?;
    Ok(TemperedSystem::new(target, base, 0.0)?.with_masses(vec![1.0], control_mass)?)
}

/// Index of the lighter component and the midpoint between the two means,
/// which splits the line into the two mode regions.
pub fn minor_mode(settings: &BimodalSettings) -> (usize, f64) {
    let minor = usize::from(settings.weights[1] < settings.weights[0]);
    (minor, 0.5 * (settings.means[0] + settings.means[1]))
}

fn on_minor_side(settings: &BimodalSettings, x: f64) -> bool {
    let (minor, mid) = minor_mode(settings);
    (x > mid) == (settings.means[minor] > mid)
}

fn density(target: &GaussianMixtureModel, x: f64) -> f64 {
    (-target.potential(&[x])).exp()
}

/// Exact target mass on the minor mode's side of the midpoint.
pub fn true_minor_mass(system: &BimodalSystem, settings: &BimodalSettings) -> Result<f64> {
    let (minor, mid) = minor_mode(settings);
    let reach = settings.sds.iter().copied().fold(0.0, f64::max) * 40.0;
    let (a, b) = if settings.means[minor] > mid {
        (mid, settings.means[minor] + reach)
    } else {
        (settings.means[minor] - reach, mid)
    };
    Ok(integrate(|x| density(system.target(), x), a, b, QUAD_TOL)?)
}

/// Mass on the minor side: sample fraction for HMC, `w1`-weighted for the
/// tempered chains.
pub fn minor_mass_estimate(method: Method, records: &[TraceRecord], settings: &BimodalSettings) -> Result<f64> {
    let weights = sample_weights(method, records)?;
    Ok(records.iter().zip(&weights).filter(|(r, _)| on_minor_side(settings, r.x[0])).fold(0.0, |acc, (_, w)| acc + w))
}

fn sample_weights(method: Method, records: &[TraceRecord]) -> Result<Vec<f64>> {
    match method {
        Method::JointCt | Method::GibbsCt => Ok(normalised_weights(&ct_log_weights(records, Which::Target)?)?),
        _ => Ok(vec![1.0 / records.len() as f64; records.len()]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalRun {
    pub method: Method,
    pub seed: u64,
    #[serde(rename = "log_Z_hat")]
    pub log_z_hat: Option<f64>,
    pub minor_mode_mass: f64,
    pub minor_mode_error: f64,
    pub acceptance_rate: f64,
    pub n_divergent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalTruth {
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    pub minor_component: usize,
    pub minor_weight: f64,
    pub split_point: f64,
    pub minor_mode_mass: f64,
}

/// Bound check at the grid, plus whether halving either divergence is caught.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsDoc {
    pub report: BoundReport,
    pub halved_d_bt_detected: bool,
    pub halved_d_tb_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalSummary {
    pub truth: BimodalTruth,
    pub runs: Vec<BimodalRun>,
    pub bounds_hold: bool,
    pub max_beta_marginal_error: f64,
}

struct Cell {
    method: Method,
    seed: u64,
    run: Run,
    report: EstimateReport,
    summary: BimodalRun,
    seconds: f64,
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

pub fn bounds_doc(system: &BimodalSystem, points: usize) -> Result<BoundsDoc> {
    let grid = uniform_grid(points);
    let mut oracle = QuadratureOracle::new(system)?;
    let report = check_marginal_bounds(&oracle, &grid)?;
    let d_bt = oracle.d_bt;
    oracle.d_bt = 0.5 * d_bt;
    let halved_d_bt_detected = !check_marginal_bounds(&oracle, &grid)?.holds;
    oracle.d_bt = d_bt;
    oracle.d_tb *= 0.5;
    let halved_d_tb_detected = !check_marginal_bounds(&oracle, &grid)?.holds;
    Ok(BoundsDoc { report, halved_d_bt_detected, halved_d_tb_detected })
}

fn run_cell(cfg: &ExperimentConfig, system: &BimodalSystem, truth: &BimodalTruth, method: Method, seed: u64) -> Result<Cell> {
    let settings = &cfg.bimodal;
    let spec = RunSpec {
        method,
        hmc: cfg.settings(method)?.hmc(seed),
        st_levels: cfg.st_levels,
        ais_temperatures: cfg.ais_temperatures.first().copied().unwrap_or(2),
    };
    let init = settings.init.unwrap_or(settings.means[1 - truth.minor_component]);
    let mut rng = cell_rng(seed, method as u64);
    let start = Instant::now();
    let run = spec.run(system, &[init], None, cfg.n_samples, &mut rng)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = spec.report(&run, cfg.burn_in, system.log_zeta(), Some(system.base()))?;
    let Run::Chain(trace) = &run else {
        return Err(BenchError::Usage("the bimodal experiment runs Markov chains only".into()));
    };
    let minor = minor_mass_estimate(method, trace.after_burn_in(cfg.burn_in), settings)?;
    let summary = BimodalRun {
        method,
        seed,
        log_z_hat: report.log_z_hat,
        minor_mode_mass: minor,
        minor_mode_error: minor - truth.minor_mode_mass,
        acceptance_rate: trace.acceptance_rate(),
        n_divergent: trace.n_divergent,
    };
    Ok(Cell { method, seed, run, report, summary, seconds })
}

fn trace_name(method: Method, seed: u64) -> String {
    format!("{}_seed{seed}", method.name())
}

/// Runs every selected sampler for every seed and writes traces, reports,
/// the β-marginal grid, the bound check, histogram data and a summary.
pub fn run_bimodal1d(cfg: &ExperimentConfig, out: &Path, record_timings: bool) -> Result<BimodalSummary> {
    cfg.validate()?;
    if let Some(m) = cfg.samplers.keys().find(|m| !matches!(m, Method::Hmc | Method::JointCt | Method::GibbsCt)) {
        return Err(BenchError::Usage(format!("sampler {} is not part of the bimodal experiment", m.name())));
    }
    let settings = &cfg.bimodal;
    let system = bimodal_system(settings, cfg.control_mass)?;
    let (minor, split) = minor_mode(settings);
    let truth = BimodalTruth {
        log_z: 0.0,
        minor_component: minor,
        minor_weight: settings.weights[minor] / settings.weights.iter().sum::<f64>(),
        split_point: split,
        minor_mode_mass: true_minor_mass(&system, settings)?,
    };

    let keys: Vec<(Method, u64)> =
        cfg.samplers.keys().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    let cells = worker_pool()?
        .install(|| keys.par_iter().map(|&(m, s)| run_cell(cfg, &system, &truth, m, s)).collect::<Vec<_>>())
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    write_json(&out.join("config.json"), cfg)?;
    let doc = SystemDoc::describe(&system, ModelDoc::from(system.target()), ModelDoc::from(system.base()));
    write_text(&out.join("system.json"), &(doc.to_json() + "\n"))?;
    for c in &cells {
        let name = trace_name(c.method, c.seed);
        let path = out.join("traces").join(format!("{name}.csv"));
        crate::io::create_dir(&out.join("traces"))?;
        write_run(&c.run, crate::io::create_file(&path)?)?;
        write_json(&out.join("reports").join(format!("{name}.json")), &c.report)?;
    }

    let oracle = QuadratureOracle::new(&system)?;
    let grid = uniform_grid(settings.beta_grid_points);
    let exact = grid.iter().map(|&b| oracle.beta_density(b)).collect::<ctmc::Result<Vec<_>>>()?;
    let tempered: Vec<&Cell> = cells.iter().filter(|c| c.method != Method::Hmc).collect();
    let mut columns = Vec::with_capacity(tempered.len());
    let mut max_beta_marginal_error = 0.0f64;
    for c in &tempered {
        let Run::Chain(t) = &c.run else { unreachable!() };
        let rb = beta_marginal_rb(t.after_burn_in(cfg.burn_in), &grid)?;
        for (a, b) in rb.iter().zip(&exact) {
            max_beta_marginal_error = max_beta_marginal_error.max((a - b).abs());
        }
        columns.push(rb);
    }
    let mut w = csv_writer(&out.join("beta_marginal.csv"))?;
    let mut header = vec!["beta".to_string(), "exact".to_string()];
    header.extend(tempered.iter().map(|c| trace_name(c.method, c.seed)));
    w.write_record(&header)?;
    for (i, b) in grid.iter().enumerate() {
        let mut row = vec![b.to_string(), exact[i].to_string()];
        row.extend(columns.iter().map(|col| col[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;

    let bounds = bounds_doc(&system, settings.bound_grid_points)?;
    write_json(&out.join("bounds.json"), &bounds)?;

    write_histogram(cfg, &system, &cells, &out.join("histogram.csv"))?;

    if record_timings {
        let mut w = csv_writer(&out.join("timings.csv"))?;
        w.write_record(["method", "seed", "seconds"])?;
        for c in &cells {
            w.write_record([c.method.name().to_string(), c.seed.to_string(), c.seconds.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
    }

    let summary = BimodalSummary {
        truth,
        runs: cells.iter().map(|c| c.summary.clone()).collect(),
        bounds_hold: bounds.report.holds,
        max_beta_marginal_error,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Per-bin probability mass of the target and of each sampler's first-seed
/// chain; tempered chains are weighted by `w1`.
fn write_histogram(cfg: &ExperimentConfig, system: &BimodalSystem, cells: &[Cell], path: &Path) -> Result<()> {
    let s = &cfg.bimodal;
    let widest = s.sds.iter().copied().fold(0.0, f64::max);
    let lo = s.means.iter().copied().fold(f64::INFINITY, f64::min) - HISTOGRAM_SDS * widest;
    let hi = s.means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + HISTOGRAM_SDS * widest;
    let bins = s.histogram_bins;
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| lo + width * i as f64;

    let first_seed = cfg.seeds[0];
    let chosen: Vec<&Cell> = cells.iter().filter(|c| c.seed == first_seed).collect();
    let mut masses = Vec::with_capacity(chosen.len());
    for c in &chosen {
        let Run::Chain(t) = &c.run else { unreachable!() };
        let records = t.after_burn_in(cfg.burn_in);
        let weights = sample_weights(c.method, records)?;
        let mut h = vec![0.0; bins];
        for (r, w) in records.iter().zip(&weights) {
            let k = ((r.x[0] - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                h[k as usize] += w;
            }
        }
        masses.push(h);
    }

    let mut w = csv_writer(path)?;
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string(), "target".to_string()];
    header.extend(chosen.iter().map(|c| c.method.name().to_string()));
    w.write_record(&header)?;
    for i in 0..bins {
        let target = integrate(|x| density(system.target(), x), edge(i), edge(i + 1), QUAD_TOL)?;
        let mut row = vec![edge(i).to_string(), edge(i + 1).to_string(), target.to_string()];
        row.extend(masses.iter().map(|h| h[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
