//! Decreasing-step Euler scheme with a log of the steps whose segment
//! contains a degenerate point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DiffusionSpec, Interval};

/// Positions beyond this magnitude abort the run.
pub const DIVERGENCE_GUARD: f64 = 1e12;
/// Crossings kept in full; later ones are only counted.
pub const DEFAULT_CROSSING_CAPACITY: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("scheme diverged at step {n} from x = {x} (next value {next})")]
    Divergence { n: u64, x: f64, next: f64 },
    #[error("invalid step sequence: {0}")]
    Steps(String),
    #[error("no verified c_sigma is attached to the chain")]
    BoundUnavailable,
    #[error("invalid arguments: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StepSequence {
    /// `γ_n = γ₀ n^{-r}`
    Polynomial { gamma0: f64, r: f64 },
    /// `γ_n = ln(n + 1)^{-r}`; the shift keeps `γ_1` finite.
    Logarithmic { r: f64 },
}

impl Default for StepSequence {
    fn default() -> Self {
        Self::Polynomial { gamma0: 1.0, r: 1.0 / 3.0 }
    }
}

impl StepSequence {
    pub fn validate(&self) -> Result<(), EulerError> {
        let ok = match *self {
            Self::Polynomial { gamma0, r } => gamma0 > 0.0 && gamma0.is_finite() && r > 0.0 && r.is_finite(),
            Self::Logarithmic { r } => r > 0.0 && r.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(EulerError::Steps(format!("{self:?}")))
        }
    }

    /// `γ_n` for `n ≥ 1`.
    #[inline]
    pub fn gamma(&self, n: u64) -> f64 {
        let n = n as f64;
        match *self {
            Self::Polynomial { gamma0, r } => gamma0 * n.powf(-r),
            Self::Logarithmic { r } => n.ln_1p().powf(-r),
        }
    }

    /// `Γ_n = γ_1 + … + γ_n`
    pub fn cumulative(&self, n: u64) -> f64 {
        (1..=n).map(|k| self.gamma(k)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCondition {
    Satisfied,
    Violated,
}

/// Summability of `exp(-C/γ_n)` for every `C > 0`, decided from the family
/// parameters.
pub fn check_step_condition(steps: &StepSequence) -> StepCondition {
    let ok = match *steps {
        StepSequence::Polynomial { gamma0, r } => gamma0 > 0.0 && r > 0.0 && r <= 1.0,
        StepSequence::Logarithmic { r } => r > 1.0,
    };
    if ok {
        StepCondition::Satisfied
    } else {
        StepCondition::Violated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    StandardGaussian,
    /// ±1 with probability 1/2 each.
    Rademacher,
}

/// Centred, unit-variance noise with `E e^{θU} ≤ e^{κθ²/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub kappa: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::new(NoiseKind::StandardGaussian)
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Self {
        Self { kind, kappa: 1.0 }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::StandardGaussian => rng.sample(StandardNormal),
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Deterministic stream for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Step `n → n+1` whose segment `[X_n, X_{n+1}]` contains a degenerate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    /// Index of the pre-step position `X_n`.
    pub n: u64,
    pub from: f64,
    pub to: f64,
    /// Index into the spec's degenerate points.
    pub point: usize,
}

/// Whether `delta` lies in the closed segment between `a` and `b`.
#[inline]
pub fn segment_contains(a: f64, b: f64, delta: f64) -> bool {
    let (da, db) = (a - delta, b - delta);
    da == 0.0 || db == 0.0 || (da < 0.0) != (db < 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingLog {
    pub entries: Vec<Crossing>,
    pub capacity: usize,
    pub total: u64,
    /// Last crossing step per degenerate point.
    pub last: Vec<Option<u64>>,
}

impl CrossingLog {
    fn new(points: usize, capacity: usize) -> Self {
        Self { entries: Vec::new(), capacity, total: 0, last: vec![None; points] }
    }

    fn record(&mut self, c: Crossing) {
        self.total += 1;
        self.last[c.point] = Some(c.n);
        if self.entries.len() < self.capacity {
            self.entries.push(c);
        }
    }

    /// Last crossing over all points.
    pub fn last_crossing(&self) -> Option<u64> {
        self.last.iter().flatten().copied().max()
    }
}

/// Receives every pre-step position: `observe(k, X_{k-1})` is called right
/// before step `k`.
pub trait Observer {
    fn observe(&mut self, k: u64, x_prev: f64);
}

impl<F: FnMut(u64, f64)> Observer for F {
    fn observe(&mut self, k: u64, x_prev: f64) {
        self(k, x_prev)
    }
}

/// Bound on `|v′σ| ≤ c_σ v` verified on a neighborhood of a degenerate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifiedBound {
    pub c_sigma: f64,
    pub neighborhood: Interval,
}

/// `exp(-1/(c_σ² γ))`
pub fn lemma_bound(c_sigma: f64, gamma: f64) -> f64 {
    (-1.0 / (c_sigma * c_sigma * gamma)).exp()
}

#[derive(Debug, Clone)]
pub struct EulerChain {
    spec: DiffusionSpec,
    steps: StepSequence,
    noise: NoiseModel,
    n: u64,
    x: f64,
    gamma_sum: f64,
    rng: ChaCha8Rng,
    crossings: CrossingLog,
    bound: Option<VerifiedBound>,
    hash: u64,
}

pub(crate) const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
pub(crate) fn fnv_mix(h: u64, bits: u64) -> u64 {
    let mut h = h;
    for byte in bits.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl EulerChain {
    pub fn new(
        spec: DiffusionSpec,
        steps: StepSequence,
        noise: NoiseModel,
        x0: f64,
        seed: u64,
        replica: u64,
    ) -> Result<Self, EulerError> {
        steps.validate()?;
        if !x0.is_finite() {
            return Err(EulerError::Argument(format!("start {x0} is not finite")));
        }
        let points = spec.degenerate_points.len();
        Ok(Self {
            spec,
            steps,
            noise,
            n: 0,
            x: x0,
            gamma_sum: 0.0,
            rng: replica_rng(seed, replica),
            crossings: CrossingLog::new(points, DEFAULT_CROSSING_CAPACITY),
            bound: None,
            hash: fnv_mix(FNV_OFFSET, x0.to_bits()),
        })
    }

    pub fn with_crossing_capacity(mut self, capacity: usize) -> Self {
        self.crossings.capacity = capacity;
        self
    }

    pub fn with_verified_bound(mut self, bound: VerifiedBound) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `Γ_n`
    pub fn time(&self) -> f64 {
        self.gamma_sum
    }

    pub fn crossings(&self) -> &CrossingLog {
        &self.crossings
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    /// Hash of every position visited so far.
    pub fn trajectory_hash(&self) -> u64 {
        self.hash
    }

    /// `X_{n+1} = X_n + γ_{n+1} b(X_n) + √γ_{n+1} σ(X_n) U_{n+1}`
    #[inline]
    pub fn step(&mut self) -> Result<f64, EulerError> {
        let k = self.n + 1;
        let g = self.steps.gamma(k);
        let x = self.x;
        let u = self.noise.sample(&mut self.rng);
        let next = x + g * self.spec.drift(x) + g.sqrt() * self.spec.sigma(x) * u;
        if !next.is_finite() || next.abs() > DIVERGENCE_GUARD {
            return Err(EulerError::Divergence { n: self.n, x, next });
        }
        for (i, &d) in self.spec.degenerate_points.iter().enumerate() {
            if segment_contains(x, next, d) {
                self.crossings.record(Crossing { n: self.n, from: x, to: next, point: i });
            }
        }
        self.n = k;
        self.x = next;
        self.gamma_sum += g;
        self.hash = fnv_mix(self.hash, next.to_bits());
        Ok(next)
    }

    /// Diagnostic bound on the probability that the next step crosses Δ;
    /// `None` when `X_n` is outside the verified neighborhood.
    pub fn crossing_probability_bound(&self) -> Result<Option<f64>, EulerError> {
        let b = self.bound.ok_or(EulerError::BoundUnavailable)?;
        if !b.neighborhood.contains(self.x) {
            return Ok(None);
        }
        Ok(Some(lemma_bound(b.c_sigma, self.steps.gamma(self.n + 1))))
    }

    /// Runs `n_steps` steps, feeding each pre-step position to `observer`.
    pub fn simulate<O: Observer + ?Sized>(
        &mut self,
        n_steps: u64,
        observer: &mut O,
        thin: Option<u64>,
    ) -> Result<Summary, Box<SimulationError>> {
        if n_steps == 0 {
            return Err(Box::new(SimulationError {
                error: EulerError::Argument("n_steps must be at least 1".into()),
                partial: self.summary(None),
            }));
        }
        let mut path = thin.filter(|&s| s > 0).map(|_| vec![PathPoint { n: self.n, time: self.gamma_sum, x: self.x }]);
        let stride = thin.unwrap_or(0);
        for _ in 0..n_steps {
            observer.observe(self.n + 1, self.x);
            if let Err(error) = self.step() {
                return Err(Box::new(SimulationError { error, partial: self.summary(path) }));
            }
            if let Some(p) = path.as_mut() {
                if self.n.is_multiple_of(stride) {
                    p.push(PathPoint { n: self.n, time: self.gamma_sum, x: self.x });
                }
            }
        }
        Ok(self.summary(path))
    }

    fn summary(&self, path: Option<Vec<PathPoint>>) -> Summary {
        Summary {
            n: self.n,
            final_x: self.x,
            time: self.gamma_sum,
            crossings: self.crossings.clone(),
            last_crossing: self.crossings.last_crossing(),
            sides: self.spec.degenerate_points.iter().map(|&d| EndSide::of(self.x, d)).collect(),
            trajectory_hash: format!("{:016x}", self.hash),
            path,
        }
    }
}

/// Position of the chain relative to a degenerate point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndSide {
    Below,
    At,
    Above,
}

impl EndSide {
    pub fn of(x: f64, d: f64) -> Self {
        if x < d {
            Self::Below
        } else if x > d {
            Self::Above
        } else {
            Self::At
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub n: u64,
    pub time: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: u64,
    pub final_x: f64,
    pub time: f64,
    pub crossings: CrossingLog,
    pub last_crossing: Option<u64>,
    pub sides: Vec<EndSide>,
    pub trajectory_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<PathPoint>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (after {} steps)", partial.n)]
pub struct SimulationError {
    pub error: EulerError,
    pub partial: Summary,
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: u64, _: f64) {}
}

/// Outcome counts of constant-step paths started inside `(a, b)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HittingCounts {
    pub upper: u64,
    pub lower: u64,
    /// Paths still inside after `max_steps`.
    pub undecided: u64,
}

impl std::ops::Add for HittingCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { upper: self.upper + o.upper, lower: self.lower + o.lower, undecided: self.undecided + o.undecided }
    }
}

impl HittingCounts {
    /// Fraction of decided paths that reached `b` first, with its standard
    /// error.
    pub fn estimate(&self) -> (f64, f64) {
        let n = (self.upper + self.lower) as f64;
        if n == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let p = self.upper as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }
}

/// Runs paths `first..first + count` of the constant-step scheme from `x`
/// until they leave `(a, b)`; path `i` draws from stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn hitting_paths(
    spec: &DiffusionSpec,
    x: f64,
    a: f64,
    b: f64,
    gamma: f64,
    seed: u64,
    first: u64,
    count: u64,
    max_steps: u64,
) -> Result<HittingCounts, EulerError> {
    if !(a < x && x < b) {
        return Err(EulerError::Argument(format!("need a < x < b, got {a}, {x}, {b}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(EulerError::Argument(format!("step must be positive, got {gamma}")));
    }
    let sg = gamma.sqrt();
    let mut out = HittingCounts::default();
    for i in first..first + count {
        let mut rng = replica_rng(seed, i);
        let mut y = x;
        let mut decided = false;
        for _ in 0..max_steps {
            let u: f64 = rng.sample(StandardNormal);
            y += gamma * spec.drift(y) + sg * spec.sigma(y) * u;
            if y >= b {
                out.upper += 1;
                decided = true;
                break;
            }
            if y <= a {
                out.lower += 1;
                decided = true;
                break;
            }
        }
        if !decided {
            out.undecided += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_paper_example, ornstein_uhlenbeck, paper_example_drift};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn constant_drift() -> DiffusionSpec {
        DiffusionSpec::new("unit drift", Interval::real_line(), |_| 1.0, |_| 0.0, vec![]).unwrap()
    }

    #[test]
    fn deterministic_euler_is_harmonic() {
        let steps = StepSequence::Polynomial { gamma0: 1.0, r: 1.0 };
        let mut chain = EulerChain::new(constant_drift(), steps, NoiseModel::default(), 2.0, 1, 0).unwrap();
        let s = chain.simulate(1000, &mut NoObserver, None).unwrap();
        let h: f64 = (1..=1000).map(|k| 1.0 / k as f64).sum();
        assert_relative_eq!(s.final_x, 2.0 + h, epsilon = 1e-12);
        assert_relative_eq!(s.time, h, epsilon = 1e-12);
    }

    #[test]
    fn fixed_point_at_degenerate_point_is_a_crossing() {
        let spec = make_paper_example(0.5).unwrap();
        let mut chain = EulerChain::new(spec, StepSequence::default(), NoiseModel::default(), 0.0, 3, 0).unwrap();
        assert_eq!(chain.step().unwrap(), 0.0);
        assert_eq!(chain.crossings().total, 1);
        assert_eq!(chain.crossings().entries[0].n, 0);
    }

    #[test]
    fn one_gaussian_step_of_the_paper_example() {
        let c = 0.6;
        let spec = make_paper_example(c).unwrap();
        let steps = StepSequence::Polynomial { gamma0: 1.0, r: 1.0 / 3.0 };
        let mut chain = EulerChain::new(spec, steps, NoiseModel::default(), 1.0, 42, 0).unwrap();
        let x1 = chain.step().unwrap();
        let u: f64 = rand::Rng::sample(&mut replica_rng(42, 0), StandardNormal);
        assert_relative_eq!(paper_example_drift(1.0), 4.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(x1, 1.0 + 4.0 / 9.0 + c * u, epsilon = 1e-15);
    }

    #[test]
    fn zero_coefficients_give_a_constant_path() {
        let spec = DiffusionSpec::new("still", Interval::real_line(), |_| 0.0, |_| 0.0, vec![]).unwrap();
        let mut chain = EulerChain::new(spec, StepSequence::default(), NoiseModel::default(), 0.7, 1, 0).unwrap();
        let s = chain.simulate(500, &mut NoObserver, Some(50)).unwrap();
        assert!(s.path.unwrap().iter().all(|p| p.x == 0.7));
    }

    #[test]
    fn replays_are_identical_and_replicas_differ() {
        let spec = make_paper_example(0.75).unwrap();
        let run = |seed, replica| {
            let mut c =
                EulerChain::new(spec.clone(), StepSequence::default(), NoiseModel::default(), 1.0, seed, replica)
                    .unwrap();
            c.simulate(10_000, &mut NoObserver, None).unwrap().trajectory_hash
        };
        assert_eq!(run(7, 0), run(7, 0));
        assert_ne!(run(7, 0), run(7, 1));
        assert_ne!(run(7, 0), run(8, 0));
    }

    #[test]
    fn divergence_is_reported_with_partial_summary() {
        let spec = DiffusionSpec::new("blowup", Interval::real_line(), |x| x * x, |_| 0.0, vec![]).unwrap();
        let mut chain =
            EulerChain::new(spec, StepSequence::Polynomial { gamma0: 1.0, r: 0.1 }, NoiseModel::default(), 2.0, 1, 0)
                .unwrap();
        let err = chain.simulate(1000, &mut NoObserver, None).unwrap_err();
        assert!(matches!(err.error, EulerError::Divergence { .. }));
        assert!(err.partial.n < 1000);
    }

    #[test]
    fn observers_see_pre_step_positions() {
        let spec = constant_drift();
        let steps = StepSequence::Polynomial { gamma0: 1.0, r: 1.0 };
        let mut chain = EulerChain::new(spec, steps, NoiseModel::default(), 0.0, 1, 0).unwrap();
        let mut seen = Vec::new();
        let mut obs = |k: u64, x: f64| seen.push((k, x));
        chain.simulate(3, &mut obs, None).unwrap();
        assert_eq!(seen, vec![(1, 0.0), (2, 1.0), (3, 1.5)]);
    }

    #[test]
    fn step_condition_decisions() {
        use StepCondition::*;
        assert_eq!(check_step_condition(&StepSequence::Polynomial { gamma0: 1.0, r: 1.0 / 3.0 }), Satisfied);
        assert_eq!(check_step_condition(&StepSequence::Polynomial { gamma0: 0.5, r: 1.0 }), Satisfied);
        assert_eq!(check_step_condition(&StepSequence::Polynomial { gamma0: 1.0, r: 1.5 }), Violated);
        assert_eq!(check_step_condition(&StepSequence::Logarithmic { r: 2.0 }), Satisfied);
        assert_eq!(check_step_condition(&StepSequence::Logarithmic { r: 0.5 }), Violated);
    }

    #[test]
    fn log_half_steps_fail_summability_by_partial_sums() {
        // Σ exp(-C ln(n+1)^{1/2}) with C = 1 keeps growing like a power of N
        let steps = StepSequence::Logarithmic { r: 0.5 };
        let partial = |n: u64| -> f64 { (1..=n).map(|k| (-1.0 / steps.gamma(k)).exp()).sum() };
        let (a, b, c) = (partial(10_000), partial(100_000), partial(1_000_000));
        assert!(b - a > 0.5 * a && c - b > 0.5 * b);
        let ok = StepSequence::Logarithmic { r: 2.0 };
        let partial = |n: u64| -> f64 { (1..=n).map(|k| (-1.0 / ok.gamma(k)).exp()).sum() };
        assert!(partial(1_000_000) - partial(100_000) < 1e-6);
    }

    #[test]
    fn lemma_bound_values() {
        assert_relative_eq!(lemma_bound(2.0, 0.01), 1.388_794_386_496_402e-11, max_relative = 1e-12);
        assert_relative_eq!(lemma_bound(1.0, 1.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(lemma_bound(1.0, 1e-4) == 0.0);
    }

    #[test]
    fn crossing_bound_requires_verified_constant() {
        let spec = make_paper_example(0.75).unwrap();
        let chain =
            EulerChain::new(spec, StepSequence::Polynomial { gamma0: 1.0, r: 1.0 }, NoiseModel::default(), 0.1, 1, 0)
                .unwrap();
        assert_eq!(chain.crossing_probability_bound(), Err(EulerError::BoundUnavailable));
        let nb = Interval::new(-0.5, 0.5).unwrap();
        let chain = chain.with_verified_bound(VerifiedBound { c_sigma: 1.5, neighborhood: nb });
        assert_relative_eq!(
            chain.crossing_probability_bound().unwrap().unwrap(),
            (-1.0 / 2.25f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn noise_statistics() {
        let n = 1_000_000;
        for kind in [NoiseKind::StandardGaussian, NoiseKind::Rademacher] {
            let noise = NoiseModel::new(kind);
            let mut rng = replica_rng(2024, 0);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let u = noise.sample(&mut rng);
                s += u;
                s2 += u * u;
            }
            let mean = s / n as f64;
            let var = s2 / n as f64 - mean * mean;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{kind:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.01, "{kind:?} var {var}");
        }
    }

    #[test]
    fn ou_thinned_tail_mean_is_near_zero() {
        let spec = ornstein_uhlenbeck(0.5, 1.0).unwrap();
        let mut chain = EulerChain::new(spec, StepSequence::default(), NoiseModel::default(), 0.0, 11, 0).unwrap();
        let s = chain.simulate(100_000, &mut NoObserver, Some(500)).unwrap();
        let tail: Vec<f64> = s.path.unwrap().iter().skip(20).map(|p| p.x).collect();
        let m = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (tail.len() - 1) as f64;
        assert!(m.abs() < 3.0 * (var / tail.len() as f64).sqrt());
    }

    #[test]
    fn positions_stay_on_one_side_after_the_last_crossing() {
        let spec = make_paper_example(0.75).unwrap();
        let mut chain = EulerChain::new(spec, StepSequence::default(), NoiseModel::default(), 1.0, 5, 0).unwrap();
        let mut xs = Vec::new();
        let mut obs = |_: u64, x: f64| xs.push(x);
        let s = chain.simulate(50_000, &mut obs, None).unwrap();
        xs.push(s.final_x);
        let start = s.last_crossing.map_or(0, |n| n as usize + 1);
        let tail = &xs[start..];
        assert!(tail.iter().all(|&x| x > 0.0) || tail.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn crossing_log_is_capped_but_counts_everything() {
        // a marked point that the noise keeps crossing
        let spec = ornstein_uhlenbeck(0.5, 1.0).unwrap().with_degenerate_points(vec![0.0]).unwrap();
        let mut chain = EulerChain::new(spec, StepSequence::default(), NoiseModel::default(), 0.0, 9, 0)
            .unwrap()
            .with_crossing_capacity(10);
        let s = chain.simulate(10_000, &mut NoObserver, None).unwrap();
        assert_eq!(s.crossings.entries.len(), 10);
        assert!(s.crossings.total > 10);
        assert_eq!(s.last_crossing, s.crossings.last[0]);
    }

    proptest! {
        #[test]
        fn crossing_detection_matches_segment(a in -10.0f64..10.0, b in -10.0f64..10.0, d in -10.0f64..10.0) {
            let by_segment = a.min(b) <= d && d <= a.max(b);
            prop_assert_eq!(segment_contains(a, b, d), by_segment);
            // direct parameterisation a + t(b - a), t ∈ [0, 1]
            if a != b {
                let t = (d - a) / (b - a);
                prop_assert_eq!(by_segment, (0.0..=1.0).contains(&t));
            }
        }

        #[test]
        fn steps_are_positive_and_decreasing(gamma0 in 0.01f64..10.0, r in 0.01f64..1.0, n in 1u64..1_000_000) {
            let s = StepSequence::Polynomial { gamma0, r };
            prop_assert!(s.gamma(n) > 0.0);
            prop_assert!(s.gamma(n + 1) <= s.gamma(n));
            let l = StepSequence::Logarithmic { r: 1.0 + r };
            prop_assert!(l.gamma(n) > 0.0 && l.gamma(n + 1) <= l.gamma(n));
        }
    }

    #[test]
    fn symmetric_exit_is_even() {
        let spec = crate::model::brownian(1.0).unwrap();
        let c = hitting_paths(&spec, 0.0, -1.0, 1.0, 1e-3, 5, 0, 2000, 1_000_000).unwrap();
        assert_eq!(c.undecided, 0);
        let (p, se) = c.estimate();
        assert!((p - 0.5).abs() < 4.0 * se, "{p} ± {se}");
        let split = hitting_paths(&spec, 0.0, -1.0, 1.0, 1e-3, 5, 0, 700, 1_000_000).unwrap()
            + hitting_paths(&spec, 0.0, -1.0, 1.0, 1e-3, 5, 700, 1300, 1_000_000).unwrap();
        assert_eq!(split, c);
    }
}
