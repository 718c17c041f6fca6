//! Experiment configuration documents.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ctmc::samplers::{HmcConfig, DEFAULT_JITTER};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Bimodal1d,
    Relaxation,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Bimodal1d => "bimodal1d",
            ExperimentId::Relaxation => "relaxation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hmc,
    JointCt,
    GibbsCt,
    St,
    Ais,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hmc => "hmc",
            Method::JointCt => "joint_ct",
            Method::GibbsCt => "gibbs_ct",
            Method::St => "st",
            Method::Ais => "ais",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "hmc" => Ok(Method::Hmc),
            "joint_ct" => Ok(Method::JointCt),
            "gibbs_ct" => Ok(Method::GibbsCt),
            "st" => Ok(Method::St),
            "ais" => Ok(Method::Ais),
            _ => Err(BenchError::Usage(format!("unknown sampler {name:?}"))),
        }
    }
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

/// Integrator settings for one sampler; the seed comes from the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub step_size: f64,
    pub n_leapfrog: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

impl SamplerSettings {
    pub fn new(step_size: f64, n_leapfrog: usize) -> Self {
        Self { step_size, n_leapfrog, jitter: DEFAULT_JITTER }
    }

    pub fn hmc(&self, seed: u64) -> HmcConfig {
        HmcConfig::new(self.step_size, self.n_leapfrog, seed).with_jitter(self.jitter)
    }
}

/// Two-component one-dimensional mixture target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalSettings {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub sds: [f64; 2],
    /// Start of every chain; defaults to the heavier component's mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<f64>,
    pub histogram_bins: usize,
    pub beta_grid_points: usize,
    pub bound_grid_points: usize,
}

impl Default for BimodalSettings {
    fn default() -> Self {
        Self {
            weights: [0.65, 0.35],
            means: [-4.0, 4.0],
            sds: [0.6, 0.6],
            init: None,
            histogram_bins: 80,
            beta_grid_points: 101,
            bound_grid_points: 21,
        }
    }
}

/// Generated Boltzmann machine relaxation sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSettings {
    pub n_units: usize,
    pub n_sets: usize,
    pub s1: f64,
    pub s2: f64,
    pub bias_scale: f64,
    pub eps: f64,
    pub n_inits: usize,
    pub mc_samples: usize,
}

impl Default for RelaxationSettings {
    fn default() -> Self {
        Self { n_units: 12, n_sets: 5, s1: 6.0, s2: 2.0, bias_scale: 0.1, eps: 1e-6, n_inits: 100, mc_samples: 1000 }
    }
}

fn default_burn_in() -> f64 {
    ctmc::estimators::DEFAULT_BURN_IN
}

fn default_st_levels() -> usize {
    200
}

fn default_ais_temperatures() -> Vec<usize> {
    vec![50, 200, 1000]
}

fn default_checkpoints() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0]
}

fn default_control_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seeds: Vec<u64>,
    pub samplers: BTreeMap<Method, SamplerSettings>,
    pub n_samples: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_st_levels")]
    pub st_levels: usize,
    #[serde(default = "default_ais_temperatures")]
    pub ais_temperatures: Vec<usize>,
    /// Fractions of `n_samples` at which the relaxation estimates are scored.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_control_mass")]
    pub control_mass: f64,
    #[serde(default)]
    pub bimodal: BimodalSettings,
    #[serde(default)]
    pub relaxation: RelaxationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn bimodal1d() -> Self {
        let step = SamplerSettings::new(0.3, 30);
        Self {
            experiment: ExperimentId::Bimodal1d,
            seeds: (0..5).collect(),
            samplers: [(Method::Hmc, step), (Method::JointCt, step), (Method::GibbsCt, step)].into_iter().collect(),
            n_samples: 100_000,
            burn_in: default_burn_in(),
            st_levels: default_st_levels(),
            ais_temperatures: default_ais_temperatures(),
            checkpoints: default_checkpoints(),
            control_mass: default_control_mass(),
            bimodal: BimodalSettings::default(),
            relaxation: RelaxationSettings::default(),
            output_dir: None,
        }
    }

    pub fn relaxation() -> Self {
        // tuned on held-out parameter sets 100 to 102
        Self {
            experiment: ExperimentId::Relaxation,
            samplers: [
                (Method::JointCt, SamplerSettings::new(0.5, 20)),
                (Method::GibbsCt, SamplerSettings::new(0.7, 30)),
                (Method::St, SamplerSettings::new(0.5, 30)),
                (Method::Ais, SamplerSettings::new(0.5, 20)),
            ]
            .into_iter()
            .collect(),
            ..Self::bimodal1d()
        }
    }

    pub fn default_for(experiment: ExperimentId) -> Self {
        match experiment {
            ExperimentId::Bimodal1d => Self::bimodal1d(),
            ExperimentId::Relaxation => Self::relaxation(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn settings(&self, method: Method) -> Result<SamplerSettings> {
        self.samplers
            .get(&method)
            .copied()
            .ok_or_else(|| BenchError::Usage(format!("config has no settings for sampler {}", method.name())))
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(BenchError::Usage(msg));
        if self.seeds.is_empty() {
            return usage("at least one seed is required".into());
        }
        if self.samplers.is_empty() {
            return usage("at least one sampler must be selected".into());
        }
        for (m, s) in &self.samplers {
            s.hmc(0).validate().map_err(|e| BenchError::Usage(format!("{}: {e}", m.name())))?;
        }
        if self.n_samples < 2 {
            return usage("n_samples must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return usage(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        if self.st_levels < 2 {
            return usage("st_levels must be at least 2".into());
        }
        if self.ais_temperatures.iter().any(|&t| t < 2) {
            return usage("every AIS schedule needs at least 2 temperatures".into());
        }
        if self.samplers.contains_key(&Method::Ais) && self.ais_temperatures.is_empty() {
            return usage("AIS is selected but ais_temperatures is empty".into());
        }
        if self.checkpoints.is_empty() || self.checkpoints.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return usage("checkpoints must be fractions in (0, 1]".into());
        }
        if !(self.control_mass > 0.0 && self.control_mass.is_finite()) {
            return usage("control_mass must be positive".into());
        }
        let b = &self.bimodal;
        if b.sds.iter().any(|s| !(*s > 0.0)) || b.weights.iter().any(|w| !(*w > 0.0)) {
            return usage("bimodal weights and standard deviations must be positive".into());
        }
        if b.histogram_bins == 0 || b.beta_grid_points < 2 || b.bound_grid_points < 2 {
            return usage("bimodal grids need at least two points and one histogram bin".into());
        }
        let r = &self.relaxation;
        if r.n_sets == 0 || r.n_inits == 0 || r.mc_samples < 2 {
            return usage("relaxation needs at least one set, one init and two ELBO samples".into());
        }
        Ok(())
    }
}
