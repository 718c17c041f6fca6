//! One sampler run and its estimate; shared by `sample`, `estimate` and the
//! experiment runners so that every path scores a trace the same way.

use std::io::{Read, Write};

use ctmc::estimators::{ais_report, ct_report, plain_report, st_report, EstimateReport};
use ctmc::model::{BaseDensity, Potential};
use ctmc::samplers::{
    ais_batch, gibbs_ct_chain, hmc_chain, joint_ct_chain, simulated_tempering_chain, ChainTrace, HmcConfig, SamplerKind,
    TemperatureSchedule,
};
use ctmc::tempering::{ExtendedState, TemperedSystem};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{BenchError, Result};

/// Output of one sampler: a Markov chain, or independent AIS runs as
/// `(final state, log weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum Run {
    Chain(ChainTrace),
    Ais(Vec<(Vec<f64>, f64)>),
}

impl Run {
    /// Number of chain samples, or AIS runs.
    pub fn len(&self) -> usize {
        match self {
            Run::Chain(t) => t.len(),
            Run::Ais(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `n` samples or runs.
    pub fn prefix(&self, n: usize) -> Run {
        match self {
            Run::Chain(t) => Run::Chain(ChainTrace {
                sampler: t.sampler,
                dim: t.dim,
                records: t.records[..n.min(t.len())].to_vec(),
                n_divergent: t.n_divergent,
            }),
            Run::Ais(r) => Run::Ais(r[..n.min(r.len())].to_vec()),
        }
    }

    /// Appends a continuation, renumbering its iterations.
    pub fn extend(&mut self, next: Run) {
        match (self, next) {
            (Run::Chain(a), Run::Chain(b)) => {
                let offset = a.records.len();
                a.n_divergent += b.n_divergent;
                a.records.extend(b.records.into_iter().map(|mut r| {
                    r.iter += offset;
                    r
                }));
            }
            (Run::Ais(a), Run::Ais(b)) => a.extend(b),
            _ => panic!("cannot join a chain with AIS runs"),
        }
    }

    /// State a continuation should start from: the last `x` and, for joint
    /// chains, the last `u`.
    fn resume_state(&self) -> Option<ExtendedState> {
        match self {
            Run::Chain(t) => t.records.last().map(|r| ExtendedState::at(r.x.clone(), r.u.unwrap_or(0.0))),
            Run::Ais(_) => None,
        }
    }
}

pub fn sampler_kind(method: Method) -> Option<SamplerKind> {
    match method {
        Method::Hmc => Some(SamplerKind::Hmc),
        Method::JointCt => Some(SamplerKind::JointCt),
        Method::GibbsCt => Some(SamplerKind::GibbsCt),
        Method::St => Some(SamplerKind::SimulatedTempering),
        Method::Ais => None,
    }
}

/// Number of AIS runs with the same transition budget as an `n_samples` chain.
pub fn ais_runs(n_samples: usize, temperatures: usize) -> usize {
    (n_samples / temperatures).max(1)
}

/// Sampler choice plus the settings every method needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub hmc: HmcConfig,
    pub st_levels: usize,
    pub ais_temperatures: usize,
}

impl RunSpec {
    pub fn schedule(&self) -> Result<TemperatureSchedule> {
        let levels = if self.method == Method::Ais { self.ais_temperatures } else { self.st_levels };
        Ok(TemperatureSchedule::linear(levels)?)
    }

    /// Runs `n` chain samples (or AIS runs) from `from`, or from `init` when
    /// `from` is `None`. Joint chains start at `u = 0`.
    pub fn run<P, B>(
        &self,
        system: &TemperedSystem<P, B>,
        init: &[f64],
        from: Option<&Run>,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Run>
    where
        P: Potential,
        B: BaseDensity,
    {
        let start = from.and_then(Run::resume_state).unwrap_or_else(|| ExtendedState::at(init.to_vec(), 0.0));
        let cfg = &self.hmc;
        Ok(match self.method {
            Method::Hmc => Run::Chain(hmc_chain(system.target(), &start.x, cfg, n, rng)?),
            Method::JointCt => Run::Chain(joint_ct_chain(system, &start, cfg, n, rng)?),
            Method::GibbsCt => Run::Chain(gibbs_ct_chain(system, &start.x, cfg, n, rng)?),
            Method::St => Run::Chain(simulated_tempering_chain(system, &self.schedule()?, &start.x, cfg, n, rng)?.trace),
            Method::Ais => Run::Ais(ais_batch(system, &self.schedule()?, cfg, n, rng)?),
        })
    }

    /// Estimate from a run: burn-in is dropped from chains, never from AIS.
    pub fn report(&self, run: &Run, burn_in: f64, log_zeta: f64, base: Option<&dyn BaseDensity>) -> Result<EstimateReport> {
        Ok(match (self.method, run) {
            (Method::Ais, Run::Ais(runs)) => ais_report(runs)?,
            (Method::Hmc, Run::Chain(t)) => plain_report(t.after_burn_in(burn_in))?,
            (Method::JointCt | Method::GibbsCt, Run::Chain(t)) => ct_report(t.after_burn_in(burn_in), log_zeta, base)?,
            (Method::St, Run::Chain(t)) => st_report(t.after_burn_in(burn_in), &self.schedule()?, log_zeta)?,
            (m, _) => return Err(BenchError::Usage(format!("trace does not match sampler {}", m.name()))),
        })
    }
}

pub fn ais_header(dim: usize) -> Vec<String> {
    let mut h = vec!["run".to_string(), "log_weight".to_string()];
    h.extend((0..dim).map(|i| format!("x{i}")));
    h
}

pub fn write_run<W: Write>(run: &Run, writer: W) -> Result<()> {
    match run {
        Run::Chain(t) => Ok(t.write_csv(writer)?),
        Run::Ais(runs) => {
            let dim = runs.first().map_or(0, |r| r.0.len());
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(ais_header(dim))?;
            for (i, (x, lw)) in runs.iter().enumerate() {
                let mut row = vec![i.to_string(), lw.to_string()];
                row.extend(x.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            w.flush().map_err(csv::Error::from)?;
            Ok(())
        }
    }
}

pub fn read_run<R: Read>(method: Method, reader: R) -> Result<Run> {
    match sampler_kind(method) {
        Some(kind) => Ok(Run::Chain(ChainTrace::read_csv(reader, kind)?)),
        None => {
            let mut rd = csv::Reader::from_reader(reader);
            let headers = rd.headers()?.clone();
            if headers.len() < 2 || headers.iter().zip(ais_header(headers.len() - 2)).any(|(a, b)| a != b) {
                return Err(BenchError::Usage("unexpected AIS trace header".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| BenchError::Usage(format!("bad number {s:?} in AIS trace")));
            let mut runs = Vec::new();
            for row in rd.records() {
                let row = row?;
                let x = (2..row.len()).map(|i| num(&row[i])).collect::<Result<Vec<_>>>()?;
                runs.push((x, num(&row[1])?));
            }
            Ok(Run::Ais(runs))
        }
    }
}

/// Sidecar written next to every `sample` trace; enough to rebuild the
/// estimate without rerunning the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sampler: Method,
    pub seed: u64,
    pub hmc: HmcConfig,
    pub n_samples: usize,
    pub burn_in: f64,
    pub st_levels: usize,
    pub ais_temperatures: usize,
    pub acceptance_rate: Option<f64>,
    pub n_divergent: Option<usize>,
    pub system: ctmc::tempering::SystemDoc,
    pub report: EstimateReport,
}

impl SampleSummary {
    pub fn spec(&self) -> RunSpec {
        RunSpec { method: self.sampler, hmc: self.hmc, st_levels: self.st_levels, ais_temperatures: self.ais_temperatures }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctmc::model::GaussianDensity;
    use rand::SeedableRng;

    fn system() -> TemperedSystem<GaussianDensity, GaussianDensity> {
        let target = GaussianDensity::isotropic(vec![1.0, -0.5], 2.0).unwrap();
        TemperedSystem::new(target, GaussianDensity::standard(2), 0.0).unwrap()
    }

    fn spec(method: Method) -> RunSpec {
        RunSpec { method, hmc: HmcConfig::new(0.4, 8, 1), st_levels: 10, ais_temperatures: 10 }
    }

    #[test]
    fn segmented_run_equals_single_run() {
        let sys = system();
        for m in [Method::Hmc, Method::JointCt, Method::GibbsCt, Method::St, Method::Ais] {
            let s = spec(m);
            let whole = s.run(&sys, &[0.0, 0.0], None, 60, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut parts = s.run(&sys, &[0.0, 0.0], None, 25, &mut rng).unwrap();
            let next = s.run(&sys, &[0.0, 0.0], Some(&parts), 35, &mut rng).unwrap();
            parts.extend(next);
            assert_eq!(parts, whole, "{}", m.name());
            assert_eq!(whole.prefix(25).len(), 25);
        }
    }

    #[test]
    fn csv_round_trip_reproduces_report() {
        let sys = system();
        for m in [Method::Hmc, Method::JointCt, Method::GibbsCt, Method::St, Method::Ais] {
            let s = spec(m);
            let run = s.run(&sys, &[0.0, 0.0], None, 200, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            let mut buf = Vec::new();
            write_run(&run, &mut buf).unwrap();
            let back = read_run(m, buf.as_slice()).unwrap();
            let a = s.report(&run, 0.1, 0.0, Some(sys.base())).unwrap();
            let b = s.report(&back, 0.1, 0.0, Some(sys.base())).unwrap();
            assert_eq!(a, b, "{}", m.name());
        }
    }

    #[test]
    fn mismatched_trace_is_a_usage_error() {
        let sys = system();
        let run = spec(Method::Ais).run(&sys, &[0.0, 0.0], None, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(spec(Method::JointCt).report(&run, 0.1, 0.0, None), Err(BenchError::Usage(_))));
        assert_eq!(ais_runs(100_000, 1000), 100);
        assert_eq!(ais_runs(10, 1000), 1);
    }
}
