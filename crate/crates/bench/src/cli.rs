//! The `ctmc` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use ctmc::model::{generate_bm_params, relaxation_from_bm, ModelDoc};
use ctmc::tempering::SystemDoc;

use crate::bimodal::run_bimodal1d;
use crate::config::{ExperimentConfig, ExperimentId, Method, SamplerSettings};
use crate::error::{BenchError, Result};
use crate::io::{create_file, open, read_text, to_json, write_json, write_text, cell_rng};
use crate::pipeline::{read_run, sampler_kind, write_run, Run, RunSpec, SampleSummary};
use crate::relaxation::{fit_base, run_relaxation, OracleDoc};

#[derive(Debug, Parser)]
#[command(name = "ctmc", version, about = "Continuous-tempering samplers, estimators and benchmark experiments")]
pub struct Cli {
    /// Random seed (for `bench`, replaces the configured seed list).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Experiment configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; JSON documents go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    Bimodal1d,
    Relaxation,
}

impl From<ExperimentArg> for ExperimentId {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Bimodal1d => ExperimentId::Bimodal1d,
            ExperimentArg::Relaxation => ExperimentId::Relaxation,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random Boltzmann machine (writes bm.json).
    Bmgen {
        /// Number of binary units.
        #[arg(long, default_value_t = 12)]
        dim: usize,
    },
    /// Exact Boltzmann machine and relaxation moments by enumeration (writes oracle.json).
    Oracle {
        /// Boltzmann machine or relaxation document.
        #[arg(long)]
        model: PathBuf,
    },
    /// Fit a Gaussian base and log ζ to a relaxation (writes system.json and base_fit.json).
    Fitbase {
        /// Boltzmann machine or relaxation document.
        #[arg(long)]
        model: PathBuf,
    },
    /// Run one sampler on a tempered system (writes trace.csv and summary.json).
    Sample {
        /// Tempered-system document.
        #[arg(long)]
        system: PathBuf,
        /// hmc, joint-ct, gibbs-ct, st or ais.
        #[arg(long)]
        sampler: String,
        /// Chain length, or the AIS transition budget.
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        n_leapfrog: Option<usize>,
        /// Temperatures in the ST or AIS schedule.
        #[arg(long)]
        levels: Option<usize>,
        /// Comma-separated initial state; defaults to the base mean.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        init: Option<Vec<f64>>,
    },
    /// Recompute the estimate report from a sampled trace (writes report.json).
    Estimate {
        #[arg(long)]
        trace: PathBuf,
        /// Sample summary; defaults to summary.json next to the trace.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run a full experiment and write all its tables and artefacts.
    Bench {
        experiment: ExperimentArg,
        /// Also write wall-clock timings (timings.csv), which are not reproducible.
        #[arg(long)]
        record_timings: bool,
    },
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", e.render());
            eprintln!("{}", Cli::command().render_help());
            return 1;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli, fallback: ExperimentId) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::from_json(&read_text(path)?),
        None => Ok(ExperimentConfig::default_for(fallback)),
    }
}

/// Writes `text` to `name` under `--out`, or to stdout.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<()> {
    match &cli.out {
        Some(dir) => write_text(&dir.join(name), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_bm(path: &Path) -> Result<ctmc::model::BoltzmannMachine> {
    Ok(ModelDoc::from_json(&read_text(path)?)?.boltzmann_machine()?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Bmgen { dim } => {
            let r = load_config(cli, ExperimentId::Relaxation)?.relaxation;
            let bm = generate_bm_params(seed, *dim, r.s1, r.s2, r.bias_scale)?;
            emit(cli, "bm.json", &(ModelDoc::from(&bm).to_json() + "\n"))
        }
        Command::Oracle { model } => {
            let r = load_config(cli, ExperimentId::Relaxation)?.relaxation;
            let bm = read_bm(model)?;
            let relaxation = relaxation_from_bm(&bm, r.eps)?;
            let exact = ctmc::model::bm_exhaustive_oracle(&bm)?;
            let moments = ctmc::model::relaxation_true_moments(&relaxation, &exact)?;
            emit(cli, "oracle.json", &to_json(&OracleDoc::new(&exact, &moments)))
        }
        Command::Fitbase { model } => {
            let cfg = load_config(cli, ExperimentId::Relaxation)?;
            let bm = read_bm(model)?;
            let relaxation = relaxation_from_bm(&bm, cfg.relaxation.eps)?;
            let (mixture, base, log_zeta) = fit_base(&cfg.relaxation, &relaxation, seed)?;
            let doc = SystemDoc {
                target: ModelDoc::from(&relaxation),
                base: ModelDoc::from(&base),
                log_zeta,
                control_mass: cfg.control_mass,
                mass_diag: None,
            };
            if let Some(dir) = &cli.out {
                write_json(&dir.join("base_fit.json"), &mixture)?;
            }
            emit(cli, "system.json", &(doc.to_json() + "\n"))
        }
        Command::Sample { system, sampler, n_samples, step_size, n_leapfrog, levels, init } => {
            let cfg = load_config(cli, ExperimentId::Relaxation)?;
            let out = cli.out.as_ref().ok_or_else(|| BenchError::Usage("sample needs --out for its trace".into()))?;
            let method = Method::parse(sampler)?;
            let doc = SystemDoc::from_json(&read_text(system)?)?;
            let tempered = doc.build()?;
            let mut settings = cfg.samplers.get(&method).copied();
            if let (Some(eps), Some(l)) = (step_size, n_leapfrog) {
                settings = Some(SamplerSettings::new(*eps, *l));
            } else if let Some(s) = settings.as_mut() {
                s.step_size = step_size.unwrap_or(s.step_size);
                s.n_leapfrog = n_leapfrog.unwrap_or(s.n_leapfrog);
            }
            let settings = settings.ok_or_else(|| {
                BenchError::Usage(format!("no settings for {}; pass --step-size and --n-leapfrog", method.name()))
            })?;
            let n = n_samples.unwrap_or(cfg.n_samples);
            let spec = RunSpec {
                method,
                hmc: settings.hmc(seed),
                st_levels: levels.unwrap_or(cfg.st_levels),
                ais_temperatures: levels.or(cfg.ais_temperatures.first().copied()).unwrap_or(cfg.st_levels),
            };
            spec.hmc.validate()?;
            let init = init.clone().unwrap_or_else(|| ctmc::model::BaseDensity::mean(tempered.base()));
            let mut rng = cell_rng(seed, 0);
            let count = if method == Method::Ais { crate::pipeline::ais_runs(n, spec.ais_temperatures) } else { n };
            let run = spec.run(&tempered, &init, None, count, &mut rng)?;
            let report = spec.report(&run, cfg.burn_in, tempered.log_zeta(), Some(tempered.base()))?;
            let (acceptance_rate, n_divergent) = match &run {
                Run::Chain(t) => (Some(t.acceptance_rate()), Some(t.n_divergent)),
                Run::Ais(_) => (None, None),
            };
            write_run(&run, create_file(&out.join("trace.csv"))?)?;
            let summary = SampleSummary {
                sampler: method,
                seed,
                hmc: spec.hmc,
                n_samples: n,
                burn_in: cfg.burn_in,
                st_levels: spec.st_levels,
                ais_temperatures: spec.ais_temperatures,
                acceptance_rate,
                n_divergent,
                system: doc,
                report,
            };
            write_json(&out.join("summary.json"), &summary)
        }
        Command::Estimate { trace, summary } => {
            let summary_path = match summary {
                Some(p) => p.clone(),
                None => trace.parent().unwrap_or(Path::new(".")).join("summary.json"),
            };
            let summary: SampleSummary = crate::io::read_json(&summary_path)?;
            let system = summary.system.build()?;
            let run = read_run(summary.sampler, open(trace)?)?;
            if sampler_kind(summary.sampler).is_some() != matches!(run, Run::Chain(_)) {
                return Err(BenchError::Usage("trace kind does not match the summary".into()));
            }
            let report = summary.spec().report(&run, summary.burn_in, system.log_zeta(), Some(system.base()))?;
            emit(cli, "report.json", &to_json(&report))
        }
        Command::Bench { experiment, record_timings } => {
            let id = ExperimentId::from(*experiment);
            let mut cfg = load_config(cli, id)?;
            if cfg.experiment != id {
                return Err(BenchError::Usage(format!(
                    "config describes {} but {} was requested",
                    cfg.experiment.name(),
                    id.name()
                )));
            }
            if let Some(s) = cli.seed {
                cfg.seeds = vec![s];
            }
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(id.name()));
            match id {
                ExperimentId::Bimodal1d => {
                    let summary = run_bimodal1d(&cfg, &out, *record_timings)?;
                    for r in &summary.runs {
                        println!(
                            "{:<9} seed {:<3} log Z {:>9}  minor-mode mass {:.4} (truth {:.4})",
                            r.method.name(),
                            r.seed,
                            r.log_z_hat.map_or("-".into(), |v| format!("{v:.4}")),
                            r.minor_mode_mass,
                            summary.truth.minor_mode_mass
                        );
                    }
                }
                ExperimentId::Relaxation => {
                    let summary = run_relaxation(&cfg, &out, *record_timings)?;
                    println!("{:<10} {:>4} {:>9} {:>9} {:>9} {:>9}", "method", "ckpt", "samples", "rel logZ", "rel mean", "rel cov");
                    for r in &summary.table {
                        println!(
                            "{:<10} {:>4} {:>9} {:>9.4} {:>9.4} {:>9.4}",
                            r.method, r.checkpoint, r.samples, r.rel_log_z, r.rel_mean, r.rel_cov
                        );
                    }
                }
            }
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
