//! Weighted empirical measures of the Euler scheme and their comparison with
//! the normalized speed measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler::{EulerChain, NoiseKind, NoiseModel, Observer, SimulationError, StepSequence};
use crate::feller::{FellerError, ScaleSpeedTable};
use crate::lyapunov::{Condition, ConditionReport};
use crate::model::{DiffusionSpec, Interval};
use crate::quadrature::{integrate_with, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("histograms have different layouts")]
    LayoutMismatch,
    #[error("the denominator sum is zero")]
    UndefinedRatio,
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error(transparent)]
    Feller(#[from] FellerError),
    #[error(transparent)]
    Simulation(#[from] Box<SimulationError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightSequence {
    Constant {
        eta: f64,
    },
    /// `η_n = η₀ n^{-s}`, `0 ≤ s ≤ 1` so that `H_n → ∞`.
    Polynomial {
        eta0: f64,
        s: f64,
    },
}

impl Default for WeightSequence {
    fn default() -> Self {
        Self::Constant { eta: 1.0 }
    }
}

impl WeightSequence {
    pub fn validate(&self) -> Result<(), MeasureError> {
        let ok = match *self {
            Self::Constant { eta } => eta > 0.0 && eta.is_finite(),
            Self::Polynomial { eta0, s } => eta0 > 0.0 && eta0.is_finite() && (0.0..=1.0).contains(&s),
        };
        if ok {
            Ok(())
        } else {
            Err(MeasureError::Argument(format!("invalid weights {self:?}")))
        }
    }

    #[inline]
    pub fn eta(&self, n: u64) -> f64 {
        match *self {
            Self::Constant { eta } => eta,
            Self::Polynomial { eta0, s } => eta0 * (n as f64).powf(-s),
        }
    }

    /// `H_n = η_1 + … + η_n`
    pub fn cumulative(&self, n: u64) -> f64 {
        match *self {
            Self::Constant { eta } => eta * n as f64,
            Self::Polynomial { .. } => (1..=n).map(|k| self.eta(k)).sum(),
        }
    }
}

/// Streaming weighted histogram on `[lo, hi]` with left-closed bins (the
/// last bin is closed on both sides) and explicit out-of-range mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHistogram {
    pub lo: f64,
    pub hi: f64,
    pub weights: Vec<f64>,
    pub total_weight: f64,
    pub below: f64,
    pub above: f64,
}

impl WeightedHistogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, MeasureError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi && bins > 0) {
            return Err(MeasureError::Argument(format!(
                "histogram needs finite lo < hi and bins > 0, got [{lo}, {hi}] with {bins} bins"
            )));
        }
        Ok(Self { lo, hi, weights: vec![0.0; bins], total_weight: 0.0, below: 0.0, above: 0.0 })
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let left = self.lo + w * i as f64;
        let right = if i + 1 == self.bins() { self.hi } else { self.lo + w * (i + 1) as f64 };
        (left, right)
    }

    /// Bin holding `x`, if inside `[lo, hi]`.
    #[inline]
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.bin_width()) as usize;
        Some(i.min(self.bins() - 1))
    }

    #[inline]
    pub fn observe(&mut self, x: f64, eta: f64) {
        self.total_weight += eta;
        match self.bin_of(x) {
            Some(i) => self.weights[i] += eta,
            None if x < self.lo => self.below += eta,
            None => self.above += eta,
        }
    }

    pub fn out_of_range(&self) -> f64 {
        self.below + self.above
    }

    /// `weight / (H·width)`
    pub fn density(&self, i: usize) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        self.weights[i] / (self.total_weight * self.bin_width())
    }

    /// `|Σ bins + out-of-range − H| / H`
    pub fn mass_defect(&self) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        let s: f64 = self.weights.iter().sum::<f64>() + self.out_of_range();
        (s - self.total_weight).abs() / self.total_weight
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.bins() == other.bins()
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), MeasureError> {
        if !self.same_layout(other) {
            return Err(MeasureError::LayoutMismatch);
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total_weight += other.total_weight;
        self.below += other.below;
        self.above += other.above;
        Ok(())
    }

    /// Fraction of the total weight in `[a, b]`, partial bins pro rata.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        if self.total_weight == 0.0 || a >= b {
            return 0.0;
        }
        let mut m = 0.0;
        for i in 0..self.bins() {
            let (l, r) = self.bin_edges(i);
            let overlap = (r.min(b) - l.max(a)).max(0.0);
            if overlap > 0.0 {
                m += self.weights[i] * overlap / (r - l);
            }
        }
        m / self.total_weight
    }

    /// In-range weight strictly left and right of `delta`, the bin containing
    /// it split by overlap length.
    fn split_weight(&self, delta: f64) -> (f64, f64) {
        let (mut left, mut right) = (0.0, 0.0);
        for i in 0..self.bins() {
            let (l, r) = self.bin_edges(i);
            let w = self.weights[i];
            if r <= delta {
                left += w;
            } else if l >= delta {
                right += w;
            } else {
                let f = (delta - l) / (r - l);
                left += w * f;
                right += w * (1.0 - f);
            }
        }
        (left, right)
    }

    /// Restriction to one side of `delta`, renormalized: the other side and
    /// its out-of-range mass are dropped, the bin containing `delta` keeps
    /// its share.
    pub fn restrict(&self, delta: f64, keep_right: bool) -> Self {
        let mut h = self.clone();
        for i in 0..h.bins() {
            let (l, r) = h.bin_edges(i);
            let keep = if keep_right {
                ((r - delta.max(l)) / (r - l)).clamp(0.0, 1.0)
            } else {
                ((delta.min(r) - l) / (r - l)).clamp(0.0, 1.0)
            };
            h.weights[i] *= keep;
        }
        if keep_right {
            h.below = 0.0;
        } else {
            h.above = 0.0;
        }
        h.total_weight = h.weights.iter().sum::<f64>() + h.out_of_range();
        h
    }
}

/// Observer feeding a histogram with weights `η_k` at the pre-step points.
#[derive(Debug, Clone)]
pub struct HistogramObserver {
    pub hist: WeightedHistogram,
    pub weights: WeightSequence,
}

impl Observer for HistogramObserver {
    #[inline]
    fn observe(&mut self, k: u64, x_prev: f64) {
        self.hist.observe(x_prev, self.weights.eta(k));
    }
}

/// Fractions of in-range weight left and right of `delta`.
pub fn side_mass(hist: &WeightedHistogram, delta: f64) -> (f64, f64) {
    let (l, r) = hist.split_weight(delta);
    let t = l + r;
    if t == 0.0 {
        (0.0, 0.0)
    } else {
        (l / t, r / t)
    }
}

/// Normalized speed density `m/∫m` on a subinterval.
#[derive(Debug, Clone)]
pub struct ReferenceDensity {
    table: ScaleSpeedTable,
    pub side: Interval,
    pub normalizer: f64,
    /// `∫ m` from the left end to the reference point.
    left_mass: f64,
}

impl ReferenceDensity {
    pub fn from_table(table: ScaleSpeedTable) -> Result<Self, MeasureError> {
        let policy = table.policy().limit;
        let c = table.reference();
        let side = table.interval();
        let left = crate::quadrature::improper_limit(|x| table.m(x).unwrap_or(f64::NAN), side.left, c, &policy)
            .map_err(FellerError::from)?
            .finite_value()
            .ok_or(FellerError::SpeedNotIntegrable { endpoint: side.left })?;
        let normalizer = table.speed_mass()?;
        Ok(Self { table, side, normalizer, left_mass: left })
    }

    pub fn density(&self, x: f64) -> f64 {
        if !self.side.contains(x) {
            return 0.0;
        }
        self.table.m(x).map(|m| m / self.normalizer).unwrap_or(f64::NAN)
    }

    fn integral_m(&self, a: f64, b: f64) -> Result<f64, MeasureError> {
        // dyadic breakpoints around the reference keep a far-off bump from
        // being missed on long ranges
        let c = self.table.reference();
        let mut cuts = vec![a];
        for j in -4..64 {
            let s = 2f64.powi(j);
            for p in [c - s, c + s] {
                if p > a && p < b {
                    cuts.push(p);
                }
            }
        }
        if c > a && c < b {
            cuts.push(c);
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let tol = Tolerance::mixed(1e-13);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let r = integrate_with(
                &|x| self.table.m(x).unwrap_or(f64::NAN),
                w[0],
                w[1],
                tol,
                self.table.policy().max_subdivisions,
            )
            .map_err(FellerError::from)?;
            total += r.value;
        }
        Ok(total)
    }

    /// Probability of `(-∞, x]`.
    pub fn cdf(&self, x: f64) -> Result<f64, MeasureError> {
        if x <= self.side.left {
            return Ok(0.0);
        }
        if x >= self.side.right {
            return Ok(1.0);
        }
        let c = self.table.reference();
        let part = if x >= c { self.integral_m(c, x)? } else { -self.integral_m(x, c)? };
        Ok(((self.left_mass + part) / self.normalizer).clamp(0.0, 1.0))
    }

    /// Probability of `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64, MeasureError> {
        let (a, b) = (a.max(self.side.left), b.min(self.side.right));
        if a >= b {
            return Ok(0.0);
        }
        if self.side.contains(a) && self.side.contains(b) {
            return Ok(self.integral_m(a, b)? / self.normalizer);
        }
        Ok(self.cdf(b)? - self.cdf(a)?)
    }
}

/// `Σ |histogram density − mean reference density|·width` over the bins, plus
/// histogram mass outside the range and reference mass outside the range.
pub fn l1_distance(hist: &WeightedHistogram, reference: &ReferenceDensity) -> Result<f64, MeasureError> {
    if hist.total_weight == 0.0 {
        return Err(MeasureError::Argument("empty histogram".into()));
    }
    let mut d = 0.0;
    let mut ref_in = 0.0;
    for i in 0..hist.bins() {
        let (l, r) = hist.bin_edges(i);
        let q = reference.mass(l, r)?;
        ref_in += q;
        d += (hist.weights[i] / hist.total_weight - q).abs();
    }
    d += hist.out_of_range() / hist.total_weight;
    d += (1.0 - ref_in).max(0.0);
    Ok(d.min(2.0))
}

/// Running `Σ η_k f(X_{k-1}) / Σ η_k g(X_{k-1})`.
pub struct RatioEstimator<F, G> {
    f: F,
    g: G,
    weights: WeightSequence,
    num: f64,
    den: f64,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> RatioEstimator<F, G> {
    pub fn new(f: F, g: G, weights: WeightSequence) -> Self {
        Self { f, g, weights, num: 0.0, den: 0.0 }
    }

    pub fn ratio(&self) -> Result<f64, MeasureError> {
        if self.den == 0.0 {
            return Err(MeasureError::UndefinedRatio);
        }
        Ok(self.num / self.den)
    }
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Observer for RatioEstimator<F, G> {
    #[inline]
    fn observe(&mut self, k: u64, x_prev: f64) {
        let eta = self.weights.eta(k);
        self.num += eta * (self.f)(x_prev);
        self.den += eta * (self.g)(x_prev);
    }
}

/// Ratio over a recorded stream of pre-step positions.
pub fn ratio_ergodic_estimate<F, G>(positions: &[f64], f: F, g: G, weights: WeightSequence) -> Result<f64, MeasureError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut est = RatioEstimator::new(f, g, weights);
    for (i, &x) in positions.iter().enumerate() {
        est.observe(i as u64 + 1, x);
    }
    est.ratio()
}

fn stability_points(spec: &DiffusionSpec, threshold: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    let mut pts = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = threshold * 1e3f64.powf(k as f64 / (n - 1) as f64);
        for x in [-t, t] {
            if spec.interval.contains(x) {
                pts.push(x);
            }
        }
    }
    pts
}

/// `x b(x) + σ²(x)/2 ≤ -α x²` on a grid of `|x| ∈ [M, 1000 M]`. The report
/// carries the largest α that would pass on the same grid.
pub fn stability_check(
    spec: &DiffusionSpec,
    alpha: f64,
    threshold: f64,
    points: usize,
) -> Result<ConditionReport, MeasureError> {
    if !(alpha > 0.0 && threshold > 0.0) {
        return Err(MeasureError::Argument(format!("alpha and M must be positive, got {alpha} and {threshold}")));
    }
    let pts = stability_points(spec, threshold, points);
    if pts.is_empty() {
        return Err(MeasureError::Argument("no grid point with |x| >= M inside the interval".into()));
    }
    let mut worst = (f64::INFINITY, f64::NAN);
    let mut best_alpha = f64::INFINITY;
    for &x in &pts {
        let s = spec.sigma(x);
        let lhs = x * spec.drift(x) + 0.5 * s * s;
        let margin = -alpha * x * x - lhs;
        if margin < worst.0 {
            worst = (margin, x);
        }
        best_alpha = best_alpha.min(-lhs / (x * x));
    }
    let mut r = ConditionReport::new(Condition::Stability, worst.0 >= 0.0, worst.0, worst.1, pts.len());
    r.alpha = Some(best_alpha);
    r.threshold = Some(threshold);
    Ok(r)
}

/// Setup of a weighted-empirical-measure run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    pub n_steps: u64,
    pub steps: StepSequence,
    pub weights: WeightSequence,
    pub noise: NoiseKind,
    pub x0: f64,
    /// Window and bin count of the emitted histogram.
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// The L1 comparison uses `[Δ - w, Δ + w]` at the same bin width, so that
    /// either half-line is covered whatever the emitted window.
    pub compare_half_width: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            n_steps: 1_000_000,
            steps: StepSequence::default(),
            weights: WeightSequence::default(),
            noise: NoiseKind::StandardGaussian,
            x0: 1.0,
            lo: -2.0,
            hi: 8.0,
            bins: 200,
            compare_half_width: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    pub n: u64,
    pub final_x: f64,
    /// Split point used for `side_mass`, if the model has one.
    pub delta: Option<f64>,
    pub side_mass: (f64, f64),
    pub occupied_right: bool,
    pub l1_distance: Option<f64>,
    /// Why no L1 distance could be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_unavailable: Option<String>,
    pub crossings: u64,
    pub last_crossing: Option<u64>,
    pub out_of_range_mass: f64,
    pub mass_defect: f64,
    pub trajectory_hash: String,
}

#[derive(Debug, Clone)]
pub struct DensityRun {
    pub hist: WeightedHistogram,
    pub compare: WeightedHistogram,
    pub summary: DensitySummary,
}

/// Euler run feeding ν^η, then side masses and the L1 distance of the
/// occupied side against the normalized speed measure.
pub fn run_density(
    spec: &DiffusionSpec,
    cfg: &DensityConfig,
    seed: u64,
    replica: u64,
) -> Result<DensityRun, MeasureError> {
    cfg.weights.validate()?;
    let delta = spec.degenerate_points.first().copied();
    let centre = delta.unwrap_or_else(|| spec.interval.default_reference());
    let width = (cfg.hi - cfg.lo) / cfg.bins.max(1) as f64;
    if !(cfg.compare_half_width > 0.0 && width > 0.0) {
        return Err(MeasureError::Argument("bad histogram window".into()));
    }
    let half_bins = (cfg.compare_half_width / width).round().max(1.0) as usize;
    let half = half_bins as f64 * width;
    let mut hist = WeightedHistogram::new(cfg.lo, cfg.hi, cfg.bins)?;
    let mut compare = WeightedHistogram::new(centre - half, centre + half, 2 * half_bins)?;
    let weights = cfg.weights;
    let mut chain = EulerChain::new(spec.clone(), cfg.steps, NoiseModel::new(cfg.noise), cfg.x0, seed, replica)
        .map_err(|e| MeasureError::Argument(e.to_string()))?;
    let mut obs = |k: u64, x: f64| {
        let eta = weights.eta(k);
        hist.observe(x, eta);
        compare.observe(x, eta);
    };
    let run = chain.simulate(cfg.n_steps, &mut obs, None)?;

    let sides = side_mass(&compare, centre);
    let occupied_right = sides.1 >= sides.0;
    let (l1_distance, l1_unavailable) = match occupied_l1(spec, &compare, delta, occupied_right) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = DensitySummary {
        n: run.n,
        final_x: run.final_x,
        delta,
        side_mass: side_mass(&hist, centre),
        occupied_right,
        l1_distance,
        l1_unavailable,
        crossings: run.crossings.total,
        last_crossing: run.last_crossing,
        out_of_range_mass: if hist.total_weight == 0.0 { 0.0 } else { hist.out_of_range() / hist.total_weight },
        mass_defect: hist.mass_defect(),
        trajectory_hash: run.trajectory_hash,
    };
    Ok(DensityRun { hist, compare, summary })
}

fn occupied_l1(
    spec: &DiffusionSpec,
    compare: &WeightedHistogram,
    delta: Option<f64>,
    right: bool,
) -> Result<f64, MeasureError> {
    let (side, restricted) = match delta {
        Some(d) => {
            let probe = if right { d + 1e-9 * (1.0 + d.abs()) } else { d - 1e-9 * (1.0 + d.abs()) };
            let side = spec
                .subinterval_containing(probe)
                .ok_or_else(|| MeasureError::Argument("no subinterval next to the degenerate point".into()))?;
            (side, compare.restrict(d, right))
        }
        None => (spec.interval, compare.clone()),
    };
    let table = ScaleSpeedTable::on_subinterval(spec, side, Default::default())?;
    let reference = ReferenceDensity::from_table(table)?;
    l1_distance(&restricted, &reference)
}
