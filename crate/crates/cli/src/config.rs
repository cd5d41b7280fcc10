//! TOML experiment configuration: flat run settings plus one optional block
//! per target family. Unknown keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use lifted_mcmc::samplers::{RhoPolicy, SamplerKind};
use lifted_mcmc::{BalancingFunction, ProposalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    IsingSweepEta,
    IsingSweepMu,
    CrimeVs,
    TransdimDemo,
    Validate,
}

impl Experiment {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ising-sweep-eta" => Experiment::IsingSweepEta,
            "ising-sweep-mu" => Experiment::IsingSweepMu,
            "crime-vs" => Experiment::CrimeVs,
            "transdim-demo" => Experiment::TransdimDemo,
            "validate" => Experiment::Validate,
            other => bail!(
                "unknown experiment {other:?}; expected one of ising-sweep-eta, \
                 ising-sweep-mu, crime-vs, transdim-demo, validate"
            ),
        })
    }
}

pub fn parse_sampler(s: &str) -> Result<SamplerKind> {
    Ok(match s {
        "mh" => SamplerKind::MetropolisHastings,
        "lifted1" => SamplerKind::Lifted1,
        "lifted2-opt" => SamplerKind::Lifted2(RhoPolicy::Optimal),
        "lifted2-worst" => SamplerKind::Lifted2(RhoPolicy::Worst),
        "revmix" => SamplerKind::RevMix,
        other => bail!(
            "unknown sampler {other:?}; expected mh, lifted1, lifted2-opt, \
             lifted2-worst or revmix"
        ),
    })
}

pub fn parse_proposal(s: &str) -> Result<ProposalSpec> {
    Ok(match s {
        "uniform" => ProposalSpec::Uniform,
        "barker" => ProposalSpec::Informed(BalancingFunction::Barker),
        "sqrt" => ProposalSpec::Informed(BalancingFunction::Sqrt),
        other => bail!("unknown proposal {other:?}; expected uniform, barker or sqrt"),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default)]
    samplers: Vec<String>,
    #[serde(default)]
    proposals: Vec<String>,
    iters: Option<u64>,
    burnin: Option<u64>,
    replicates: Option<u64>,
    seed: Option<u64>,
    output: Option<String>,
    #[serde(default)]
    ising: RawIsing,
    #[serde(default)]
    crime: RawCrime,
    #[serde(default)]
    transdim: RawTransdim,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIsing {
    eta: Option<Vec<u64>>,
    lambda: Option<f64>,
    mu: Option<Vec<f64>>,
    ell: Option<u64>,
    field_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrime {
    dataset: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransdim {
    p: Option<u64>,
    n_obs: Option<u64>,
    self_mass: Option<f64>,
    scale_inflation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IsingSettings {
    pub eta_grid: Vec<usize>,
    pub lambda: f64,
    pub mu_grid: Vec<f64>,
    /// Columns `1..=ell` get the negative field. `None` means eta/2 per
    /// lattice in a sweep.
    pub ell: Option<usize>,
    pub field_seed: u64,
}

#[derive(Debug, Clone)]
pub struct TransdimSettings {
    pub p: usize,
    pub n_obs: usize,
    pub self_mass: f64,
    pub scale_inflation: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub samplers: Vec<(String, SamplerKind)>,
    pub proposals: Vec<(String, ProposalSpec)>,
    pub iters: u64,
    pub burnin: u64,
    pub replicates: u64,
    pub seed: u64,
    pub output: PathBuf,
    pub ising: IsingSettings,
    pub crime_dataset: PathBuf,
    pub transdim: TransdimSettings,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{name} must be positive (got {v})")
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    let experiment = Experiment::parse(&raw.experiment)?;

    let sampler_names: Vec<String> = if raw.samplers.is_empty() {
        default_samplers(experiment).iter().map(|s| s.to_string()).collect()
    } else {
        raw.samplers
    };
    let samplers = sampler_names
        .iter()
        .map(|s| parse_sampler(s).map(|k| (s.clone(), k)))
        .collect::<Result<Vec<_>>>()?;

    let proposal_names: Vec<String> = if raw.proposals.is_empty() {
        default_proposals(experiment).iter().map(|s| s.to_string()).collect()
    } else {
        raw.proposals
    };
    let proposals = proposal_names
        .iter()
        .map(|s| parse_proposal(s).map(|p| (s.clone(), p)))
        .collect::<Result<Vec<_>>>()?;

    let iters = raw.iters.unwrap_or(match experiment {
        Experiment::CrimeVs => 10_000,
        Experiment::TransdimDemo => 100_000,
        _ => 100_000,
    });
    if iters == 0 {
        bail!("iters must be positive");
    }
    let burnin = raw.burnin.unwrap_or(iters / 10);
    if burnin >= iters {
        bail!("burnin ({burnin}) must be smaller than iters ({iters})");
    }
    let replicates = raw.replicates.unwrap_or(20);
    if replicates == 0 {
        bail!("replicates must be positive");
    }

    let eta_grid: Vec<usize> = raw
        .ising
        .eta
        .unwrap_or_else(|| match experiment {
            Experiment::IsingSweepEta => vec![50, 100, 160],
            _ => vec![50],
        })
        .into_iter()
        .map(|e| {
            if e == 0 {
                bail!("ising.eta must be positive")
            } else {
                Ok(e as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = positive("ising.lambda", raw.ising.lambda.unwrap_or(0.5))?;
    let mu_grid: Vec<f64> = raw
        .ising
        .mu
        .unwrap_or_else(|| match experiment {
            Experiment::IsingSweepMu => vec![1.0, 2.0, 3.0],
            _ => vec![1.0],
        })
        .into_iter()
        .map(|m| positive("ising.mu", m))
        .collect::<Result<Vec<_>>>()?;
    let ell = match raw.ising.ell {
        Some(l) => {
            // The canonical single-lattice default is ell = 25 at eta = 50.
            Some(l as usize)
        }
        None => {
            if eta_grid.len() == 1 {
                Some(eta_grid[0] / 2)
            } else {
                None
            }
        }
    };

    let transdim = TransdimSettings {
        p: raw.transdim.p.unwrap_or(3) as usize,
        n_obs: raw.transdim.n_obs.unwrap_or(25) as usize,
        self_mass: {
            let w = raw.transdim.self_mass.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&w) {
                bail!("transdim.self_mass must lie in [0, 1] (got {w})");
            }
            w
        },
        scale_inflation: {
            let c = raw.transdim.scale_inflation.unwrap_or(1.0);
            if c < 1.0 {
                bail!("transdim.scale_inflation must be >= 1 (got {c})");
            }
            c
        },
    };
    if transdim.p == 0 || transdim.p > 6 {
        bail!("transdim.p must lie in 1..=6 (got {})", transdim.p);
    }

    Ok(ExperimentConfig {
        experiment,
        samplers,
        proposals,
        iters,
        burnin,
        replicates,
        seed: raw.seed.unwrap_or(1),
        output: PathBuf::from(raw.output.unwrap_or_else(|| default_output(experiment).into())),
        ising: IsingSettings {
            eta_grid,
            lambda,
            mu_grid,
            ell,
            field_seed: raw.ising.field_seed.unwrap_or(0),
        },
        crime_dataset: PathBuf::from(
            raw.crime.dataset.unwrap_or_else(|| "data/crime.csv".into()),
        ),
        transdim,
    })
}

fn default_samplers(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::IsingSweepEta | Experiment::IsingSweepMu => &["mh", "lifted1"],
        Experiment::CrimeVs => &["mh", "lifted1", "lifted2-opt"],
        // transdim-demo always runs both the lifted and the
        // reversible jump kernels.
        Experiment::TransdimDemo | Experiment::Validate => &[],
    }
}

fn default_proposals(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::IsingSweepEta | Experiment::IsingSweepMu => &["uniform", "barker"],
        Experiment::CrimeVs => &["barker"],
        Experiment::TransdimDemo | Experiment::Validate => &[],
    }
}

fn default_output(e: Experiment) -> &'static str {
    match e {
        Experiment::IsingSweepEta => "ising_sweep_eta.csv",
        Experiment::IsingSweepMu => "ising_sweep_mu.csv",
        Experiment::CrimeVs => "crime_vs.csv",
        Experiment::TransdimDemo => "transdim_demo.csv",
        Experiment::Validate => "validate.csv",
    }
}
