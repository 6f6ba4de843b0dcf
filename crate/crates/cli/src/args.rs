use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "degendiff",
    version,
    about = "Boundary classification and decreasing-step Euler experiments for degenerate 1D diffusions",
    after_help = "Exit codes: 0 ok, 2 usage error, 3 numeric or I/O failure, 4 inconclusive verdict under --strict.\n\
                  With --out DIR every command writes <command>.json, manifest.json and, where listed, a CSV file.\n\
                  Passing a manifest to --config re-runs the recorded configuration and seed."
)]
pub struct Cli {
    /// Worker threads for replicated runs; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify the boundary points of every subinterval and give the ergodic verdict
    Classify(ClassifyArgs),
    /// Check a Lyapunov-type condition for a candidate function on a grid
    LyapunovCheck(LyapunovArgs),
    /// Run the decreasing-step Euler scheme.
    /// CSV columns (with --thin): replica, n, time (Γ_n), x
    Simulate(SimulateArgs),
    /// Weighted empirical measure of the scheme against the speed measure.
    /// CSV columns: bin_left, bin_right, density
    Density(DensityArgs),
    /// Probability of reaching b before a from x
    Hitprob(HitprobArgs),
    /// Expected exit time of (a, b) from x, by two formulas
    ExitTime(ExitTimeArgs),
    /// Noisy Van der Pol demo in the plane.
    /// CSV columns: x_cell, y_cell (cell centres), density
    Vdp2d(VdpArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Classify(_) => "classify",
            Self::LyapunovCheck(_) => "lyapunov-check",
            Self::Simulate(_) => "simulate",
            Self::Density(_) => "density",
            Self::Hitprob(_) => "hitprob",
            Self::ExitTime(_) => "exit-time",
            Self::Vdp2d(_) => "vdp2d",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::Classify(a) => &a.common,
            Self::LyapunovCheck(a) => &a.common,
            Self::Simulate(a) => &a.common,
            Self::Density(a) => &a.common,
            Self::Hitprob(a) => &a.common,
            Self::ExitTime(a) => &a.common,
            Self::Vdp2d(a) => &a.common,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed
    #[arg(long, env = "DEGENDIFF_SEED")]
    pub seed: Option<u64>,
    /// JSON configuration, or a manifest from an earlier run; replaces the other flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; without it the result JSON goes to stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 4 when a verdict is inconclusive
    #[arg(long)]
    pub strict: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    PaperExample,
    OrnsteinUhlenbeck,
    Brownian,
    ExampleOne,
    Powerlaw,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Built-in model
    #[arg(long, value_enum, default_value_t = ModelName::PaperExample)]
    pub model: ModelName,
    /// Noise factor of paper-example and example-one
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    /// Mean-reversion rate of ornstein-uhlenbeck
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Noise level of ornstein-uhlenbeck and brownian
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Power law: degenerate point
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Power law: drift exponent
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Power law: noise exponent (at least 1)
    #[arg(long, default_value_t = 1.0)]
    pub varsigma: f64,
    /// Power law: drift constant
    #[arg(long, default_value_t = 0.5)]
    pub cb: f64,
    /// Power law: noise constant
    #[arg(long, default_value_t = 0.5)]
    pub csigma: f64,
    /// JSON spec file; replaces the model flags
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Start point for random-limit probabilities
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateName {
    Square,
    XExp,
    Distance,
    CanonicalRepulsive,
    CanonicalStrong,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionName {
    Repulsive,
    StronglyRepulsive,
    Attractive,
    EulerHypotheses,
    GeneratorTarget,
    Stability,
}

#[derive(Args, Debug)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = CandidateName::Square)]
    pub candidate: CandidateName,
    #[arg(long, value_enum, default_value_t = ConditionName::Repulsive)]
    pub condition: ConditionName,
    /// Boundary point the candidate looks at ("inf" and "-inf" allowed)
    #[arg(long = "at", default_value = "0", allow_hyphen_values = true)]
    pub at: String,
    /// Neighborhood of the boundary point, as "left,right" (default "0,1").
    /// For canonical candidates it restricts the evaluation grid
    #[arg(long, allow_hyphen_values = true)]
    pub neighborhood: Option<String>,
    /// Reference point of the canonical candidates
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub cref: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Target value of the generator
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub target: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Threshold M of the stability check
    #[arg(long, default_value_t = 6.0)]
    pub threshold: f64,
    /// Grid points
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseName {
    Gaussian,
    Rademacher,
}

#[derive(Args, Debug, Clone)]
pub struct SchemeArgs {
    /// γ_n = gamma0·n^{-r}
    #[arg(long, default_value_t = 1.0)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub r: f64,
    /// Use γ_n = log(n+1)^{-r} instead
    #[arg(long)]
    pub log_steps: bool,
    #[arg(long, value_enum, default_value_t = NoiseName::Gaussian)]
    pub noise: NoiseName,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_steps: u64,
    /// Independent replicas, each on its own random stream
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Record every k-th point of the path in the CSV
    #[arg(long)]
    pub thin: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Weight exponent s in η_n = n^{-s}; 0 gives unit weights
    #[arg(long, default_value_t = 0.0)]
    pub weight_exponent: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct HitprobArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    /// Also estimate by this many constant-step Monte-Carlo paths
    #[arg(long)]
    pub mc_paths: Option<u64>,
    #[arg(long, default_value_t = 1e-4)]
    pub mc_gamma: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ExitTimeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VdpArgs {
    /// Noise factor
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_steps: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    #[command(flatten)]
    pub common: Common,
}
