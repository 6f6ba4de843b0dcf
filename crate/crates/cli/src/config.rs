//! Serializable run configurations. Each command echoes its configuration in
//! the manifest, and a manifest fed back through `--config` reproduces the run.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use degendiff::descriptor::{IntervalPair, ModelDescriptor, SpecFile};
use degendiff::euler::{NoiseKind, NoiseModel, StepSequence};
use degendiff::feller::FellerPolicy;
use degendiff::lyapunov::GridSpec;
use degendiff::measures::{DensityConfig, WeightSequence};
use degendiff::model::{GlueOptions, PowerLawProfile};
use degendiff::vdp2d::VdpConfig;

use crate::args::*;

pub fn model_from_args(m: &ModelArgs) -> Result<SpecFile> {
    if let Some(path) = &m.spec {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return SpecFile::from_json(&text).map_err(Into::into);
    }
    let d = match m.model {
        ModelName::PaperExample => ModelDescriptor::PaperExample { c: m.c },
        ModelName::OrnsteinUhlenbeck => ModelDescriptor::OrnsteinUhlenbeck { rate: m.rate, sigma: m.sigma },
        ModelName::Brownian => ModelDescriptor::Brownian { sigma: m.sigma },
        ModelName::ExampleOne => ModelDescriptor::ExampleOne { c: m.c },
        ModelName::Powerlaw => ModelDescriptor::Powerlaw {
            profile: PowerLawProfile {
                delta: m.delta,
                beta: m.beta,
                varsigma: m.varsigma,
                c_b: m.cb,
                c_sigma: m.csigma,
            },
            glue: GlueOptions::default(),
            outer: None,
        },
    };
    Ok(d.into())
}

fn parse_ext(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().with_context(|| format!("not a number: {t:?}")),
    }
}

fn parse_pair(s: &str) -> Result<IntervalPair> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("expected \"left,right\", got {s:?}");
    }
    Ok(IntervalPair(parse_ext(parts[0])?, parse_ext(parts[1])?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub model: SpecFile,
    #[serde(default)]
    pub policy: FellerPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl ClassifyConfig {
    pub fn from_args(a: &ClassifyArgs) -> Result<Self> {
        Ok(Self { model: model_from_args(&a.model)?, policy: FellerPolicy::default(), x0: a.x0 })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateConfig {
    Square {
        at: f64,
        neighborhood: IntervalPair,
    },
    XExp {
        at: f64,
        neighborhood: IntervalPair,
    },
    Distance {
        at: f64,
        neighborhood: IntervalPair,
    },
    /// `±(p − p(c))` towards `at`, checked on `window` when given.
    CanonicalRepulsive {
        at: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<IntervalPair>,
    },
    /// The solution of `𝒜V = −1` built from the speed measure.
    CanonicalStrong {
        at: f64,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<IntervalPair>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "kebab-case")]
pub enum CheckConfig {
    Repulsive,
    StronglyRepulsive { epsilon: f64 },
    Attractive,
    EulerHypotheses { u: IntervalPair },
    GeneratorTarget { target: f64, tol: f64 },
    Stability { alpha: f64, threshold: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub model: SpecFile,
    pub candidate: CandidateConfig,
    pub check: CheckConfig,
    #[serde(default)]
    pub grid: GridSpec,
}

impl LyapunovConfig {
    pub fn from_args(a: &LyapunovArgs) -> Result<Self> {
        let at = parse_ext(&a.at)?;
        let window = a.neighborhood.as_deref().map(parse_pair).transpose()?;
        let neighborhood = window.unwrap_or(IntervalPair(0.0, 1.0));
        let candidate = match a.candidate {
            CandidateName::Square => CandidateConfig::Square { at, neighborhood },
            CandidateName::XExp => CandidateConfig::XExp { at, neighborhood },
            CandidateName::Distance => CandidateConfig::Distance { at, neighborhood },
            CandidateName::CanonicalRepulsive => CandidateConfig::CanonicalRepulsive { at, c: a.cref, window },
            CandidateName::CanonicalStrong => CandidateConfig::CanonicalStrong { at, c: a.cref, window },
        };
        let check = match a.condition {
            ConditionName::Repulsive => CheckConfig::Repulsive,
            ConditionName::StronglyRepulsive => CheckConfig::StronglyRepulsive { epsilon: a.epsilon },
            ConditionName::Attractive => CheckConfig::Attractive,
            ConditionName::EulerHypotheses => CheckConfig::EulerHypotheses { u: neighborhood },
            ConditionName::GeneratorTarget => CheckConfig::GeneratorTarget { target: a.target, tol: a.tol },
            ConditionName::Stability => CheckConfig::Stability { alpha: a.alpha, threshold: a.threshold },
        };
        Ok(Self {
            model: model_from_args(&a.model)?,
            candidate,
            check,
            grid: GridSpec { points: a.points, ..GridSpec::default() },
        })
    }
}

fn steps_from(s: &SchemeArgs) -> StepSequence {
    if s.log_steps {
        StepSequence::Logarithmic { r: s.r }
    } else {
        StepSequence::Polynomial { gamma0: s.gamma0, r: s.r }
    }
}

fn noise_from(s: &SchemeArgs) -> NoiseKind {
    match s.noise {
        NoiseName::Gaussian => NoiseKind::StandardGaussian,
        NoiseName::Rademacher => NoiseKind::Rademacher,
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub model: SpecFile,
    #[serde(default)]
    pub steps: StepSequence,
    #[serde(default)]
    pub noise: NoiseModel,
    pub x0: f64,
    pub n_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    #[serde(default = "one")]
    pub replicas: u64,
}

impl SimulateConfig {
    pub fn from_args(a: &SimulateArgs) -> Result<Self> {
        Ok(Self {
            model: model_from_args(&a.model)?,
            steps: steps_from(&a.scheme),
            noise: NoiseModel::new(noise_from(&a.scheme)),
            x0: a.scheme.x0,
            n_steps: a.scheme.n_steps,
            thin: a.thin,
            replicas: a.scheme.replicas,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityRunConfig {
    pub model: SpecFile,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default = "one")]
    pub replicas: u64,
}

impl DensityRunConfig {
    pub fn from_args(a: &DensityArgs) -> Result<Self> {
        let weights = if a.weight_exponent == 0.0 {
            WeightSequence::Constant { eta: 1.0 }
        } else {
            WeightSequence::Polynomial { eta0: 1.0, s: a.weight_exponent }
        };
        Ok(Self {
            model: model_from_args(&a.model)?,
            density: DensityConfig {
                n_steps: a.scheme.n_steps,
                steps: steps_from(&a.scheme),
                weights,
                noise: noise_from(&a.scheme),
                x0: a.scheme.x0,
                lo: a.lo,
                hi: a.hi,
                bins: a.bins,
                ..DensityConfig::default()
            },
            replicas: a.scheme.replicas,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub paths: u64,
    pub gamma: f64,
    pub max_steps: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitprobConfig {
    pub model: SpecFile,
    pub a: f64,
    pub x: f64,
    pub b: f64,
    #[serde(default)]
    pub policy: FellerPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloConfig>,
}

impl HitprobConfig {
    pub fn from_args(a: &HitprobArgs) -> Result<Self> {
        Ok(Self {
            model: model_from_args(&a.model)?,
            a: a.a,
            x: a.x,
            b: a.b,
            policy: FellerPolicy::default(),
            monte_carlo: a.mc_paths.map(|paths| MonteCarloConfig { paths, gamma: a.mc_gamma, max_steps: 100_000_000 }),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitTimeConfig {
    pub model: SpecFile,
    pub a: f64,
    pub x: f64,
    pub b: f64,
    #[serde(default)]
    pub policy: FellerPolicy,
}

impl ExitTimeConfig {
    pub fn from_args(a: &ExitTimeArgs) -> Result<Self> {
        Ok(Self { model: model_from_args(&a.model)?, a: a.a, x: a.x, b: a.b, policy: FellerPolicy::default() })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VdpRunConfig {
    #[serde(default)]
    pub vdp: VdpConfig,
    #[serde(default = "one")]
    pub replicas: u64,
}

impl VdpRunConfig {
    pub fn from_args(a: &VdpArgs) -> Result<Self> {
        Ok(Self { vdp: VdpConfig { c: a.c, n_steps: a.n_steps, ..VdpConfig::default() }, replicas: a.replicas })
    }
}
