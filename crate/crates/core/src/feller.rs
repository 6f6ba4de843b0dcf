//! Scale function, speed measure, exit problems and boundary classification
//! on one subinterval between degenerate points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{extended_real, DiffusionSpec, Interval, ModelError, PowerLawProfile};
use crate::quadrature::{
    improper_limit, integrate_with, limit_at_boundary, stage_points, ImproperVerdict, LimitKind, LimitPolicy,
    QuadError, Tolerance,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FellerError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "{x} is outside the subinterval {interval}; σ vanishes at the degenerate points, \
         so analyse each subinterval with its own table"
    )]
    Domain { x: f64, interval: Interval },
    #[error("reference point {c} must lie strictly inside a subinterval between degenerate points")]
    Reference { c: f64 },
    #[error("{endpoint} is not an endpoint of {interval}")]
    NotEndpoint { endpoint: f64, interval: Interval },
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error("quadrature did not converge (partial value {value}, error estimate {error_estimate})")]
    NotConverged { value: f64, error_estimate: f64 },
    #[error("the speed measure is not integrable towards {endpoint}")]
    SpeedNotIntegrable { endpoint: f64 },
}

/// Numerical tolerances used by a [`ScaleSpeedTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FellerPolicy {
    pub limit: LimitPolicy,
    /// Mixed tolerance of the quadratures behind `log p′`, `p` and exit times.
    pub quad_tol: f64,
    pub max_subdivisions: usize,
    /// Cauchy tolerance for the exit-time sequence behind attainability; only
    /// finiteness matters there, not the value.
    pub attainability_cauchy_rel: f64,
}

impl Default for FellerPolicy {
    fn default() -> Self {
        Self { limit: LimitPolicy::default(), quad_tol: 1e-12, max_subdivisions: 2_000, attainability_cauchy_rel: 1e-3 }
    }
}

/// Value with an error bound; the bound includes a relative allowance for the
/// tabulated scale function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error_estimate: f64,
}

const TABLE_REL_ERROR: f64 = 1e-10;
const MAX_ANCHORS_PER_SIDE: usize = 64;
/// exp overflows beyond ~709.8.
const LOG_OVERFLOW: f64 = 700.0;

#[derive(Debug, Clone, Copy)]
struct Anchor {
    x: f64,
    log_pp: f64,
    p: f64,
}

/// Scale function `p` (with `p(c) = 0`, `p′(c) = 1`), its derivative and the
/// speed density `m = 2/(σ² p′)` on one subinterval.
///
/// Values of `log p′` and `p` at anchors approaching both ends are computed at
/// construction; every query integrates from the nearest anchor. The table is
/// immutable afterwards and can be shared between threads.
#[derive(Clone)]
pub struct ScaleSpeedTable {
    spec: DiffusionSpec,
    interval: Interval,
    c: f64,
    policy: FellerPolicy,
    anchors: Vec<Anchor>,
}

impl std::fmt::Debug for ScaleSpeedTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleSpeedTable")
            .field("spec", &self.spec.name)
            .field("interval", &self.interval)
            .field("c", &self.c)
            .field("anchors", &self.anchors.len())
            .finish()
    }
}

/// Builds the table on the subinterval containing `c`.
pub fn build_scale_speed(spec: &DiffusionSpec, c: f64, policy: FellerPolicy) -> Result<ScaleSpeedTable, FellerError> {
    ScaleSpeedTable::new(spec, c, policy)
}

impl ScaleSpeedTable {
    pub fn new(spec: &DiffusionSpec, c: f64, policy: FellerPolicy) -> Result<Self, FellerError> {
        let interval = spec.subinterval_containing(c).ok_or(FellerError::Reference { c })?;
        let mut table = Self { spec: spec.clone(), interval, c, policy, anchors: Vec::new() };
        let g = table.exponent_integrand(c);
        if !g.is_finite() {
            return Err(FellerError::Reference { c });
        }
        table.build_anchors();
        Ok(table)
    }

    /// Table on `interval` (one of the spec's subintervals) with the default
    /// reference point.
    pub fn on_subinterval(spec: &DiffusionSpec, interval: Interval, policy: FellerPolicy) -> Result<Self, FellerError> {
        Self::new(spec, interval.default_reference(), policy)
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn reference(&self) -> f64 {
        self.c
    }

    pub fn policy(&self) -> &FellerPolicy {
        &self.policy
    }

    fn tol(&self) -> Tolerance {
        Tolerance::mixed(self.policy.quad_tol)
    }

    /// `2b/σ²`
    fn exponent_integrand(&self, x: f64) -> f64 {
        let s = self.spec.sigma(x);
        2.0 * self.spec.drift(x) / (s * s)
    }

    fn integrate_exponent(&self, from: f64, to: f64) -> Result<f64, QuadError> {
        if from == to {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
        let r = integrate_with(&|y| self.exponent_integrand(y), lo, hi, self.tol(), self.policy.max_subdivisions)?;
        Ok(sign * r.value)
    }

    /// `∫ p′` between two points given `log p′` at `from`.
    fn integrate_pp(&self, from: f64, log_pp_from: f64, to: f64) -> Result<f64, QuadError> {
        if from == to {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
        let integrand = |y: f64| match self.integrate_exponent(from, y) {
            Ok(e) => (log_pp_from - e).exp(),
            Err(_) => f64::NAN,
        };
        let r = integrate_with(&integrand, lo, hi, self.tol(), self.policy.max_subdivisions)?;
        Ok(sign * r.value)
    }

    fn build_anchors(&mut self) {
        let c = self.c;
        let mut anchors = vec![Anchor { x: c, log_pp: 0.0, p: 0.0 }];
        for end in [self.interval.left, self.interval.right] {
            let mut prev = anchors[0];
            let mut side = Vec::new();
            for j in 0..MAX_ANCHORS_PER_SIDE {
                let x = if end.is_infinite() {
                    c + end.signum() * 2f64.powi(j as i32)
                } else {
                    end + (c - end) * 0.5f64.powi(j as i32 + 1)
                };
                if x == prev.x || !self.interval.contains(x) {
                    break;
                }
                let log_pp = match self.integrate_exponent(prev.x, x) {
                    Ok(e) if (prev.log_pp - e).is_finite() => prev.log_pp - e,
                    _ => break,
                };
                let p = if prev.p.is_infinite() {
                    prev.p
                } else {
                    match self.integrate_pp(prev.x, prev.log_pp, x) {
                        Ok(v) if (prev.p + v).is_finite() => prev.p + v,
                        _ => (x - c).signum() * f64::INFINITY,
                    }
                };
                let a = Anchor { x, log_pp, p };
                side.push(a);
                prev = a;
            }
            anchors.extend(side);
        }
        anchors.sort_by(|a, b| a.x.total_cmp(&b.x));
        self.anchors = anchors;
    }

    fn check_domain(&self, x: f64) -> Result<(), FellerError> {
        if self.interval.contains(x) {
            Ok(())
        } else {
            Err(FellerError::Domain { x, interval: self.interval })
        }
    }

    fn nearest_anchor(&self, x: f64) -> Anchor {
        let idx = self.anchors.partition_point(|a| a.x < x);
        let mut best = None::<Anchor>;
        for i in [idx.wrapping_sub(1), idx] {
            if let Some(a) = self.anchors.get(i) {
                if a.log_pp.is_finite() && best.is_none_or(|b| (a.x - x).abs() < (b.x - x).abs()) {
                    best = Some(*a);
                }
            }
        }
        best.unwrap_or(self.anchors[0])
    }

    /// `log p′(x) = -∫_c^x 2b/σ²`
    pub fn log_p_prime(&self, x: f64) -> Result<f64, FellerError> {
        self.check_domain(x)?;
        let a = self.nearest_anchor(x);
        Ok(a.log_pp - self.integrate_exponent(a.x, x)?)
    }

    pub fn p_prime(&self, x: f64) -> Result<f64, FellerError> {
        Ok(self.log_p_prime(x)?.exp())
    }

    /// `p″ = -(2b/σ²) p′`
    pub fn p_second(&self, x: f64) -> Result<f64, FellerError> {
        Ok(-self.exponent_integrand(x) * self.p_prime(x)?)
    }

    /// Scale function; `±∞` once `p′` overflows.
    pub fn p(&self, x: f64) -> Result<f64, FellerError> {
        self.check_domain(x)?;
        let a = self.nearest_anchor(x);
        if a.p.is_infinite() {
            return Ok(a.p);
        }
        let lp = a.log_pp - self.integrate_exponent(a.x, x)?;
        if lp > LOG_OVERFLOW {
            return Ok((x - self.c).signum() * f64::INFINITY);
        }
        match self.integrate_pp(a.x, a.log_pp, x) {
            Ok(v) => Ok(a.p + v),
            Err(QuadError::NonFinite { .. }) if a.log_pp > LOG_OVERFLOW - 50.0 => {
                Ok((x - self.c).signum() * f64::INFINITY)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Speed density `2/(σ² p′)`, evaluated in log form.
    pub fn m(&self, x: f64) -> Result<f64, FellerError> {
        let lp = self.log_p_prime(x)?;
        let s = self.spec.sigma(x).abs();
        let v = (std::f64::consts::LN_2 - 2.0 * s.ln() - lp).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x, value: v }.into())
        }
    }

    fn check_triple(&self, x: f64, a: f64, b: f64) -> Result<(), FellerError> {
        if !(a < b && a <= x && x <= b) {
            return Err(FellerError::Argument(format!("need a ≤ x ≤ b with a < b, got a = {a}, x = {x}, b = {b}")));
        }
        self.check_domain(a)?;
        self.check_domain(b)
    }

    /// Probability of reaching `b` before `a` from `x`.
    pub fn hitting_probability(&self, x: f64, a: f64, b: f64) -> Result<f64, FellerError> {
        self.check_triple(x, a, b)?;
        if x == a {
            return Ok(0.0);
        }
        if x == b {
            return Ok(1.0);
        }
        // p′ normalized at `a` does not depend on the reference point, so the
        // ratio is the same for every affine version of p
        if let (Ok(num), Ok(den)) = (self.integrate_pp(a, 0.0, x), self.integrate_pp(a, 0.0, b)) {
            if num.is_finite() && den.is_finite() && den > 0.0 {
                return Ok((num / den).clamp(0.0, 1.0));
            }
        }
        let (pa, pb, px) = (self.p(a)?, self.p(b)?, self.p(x)?);
        Ok(((px - pa) / (pb - pa)).clamp(0.0, 1.0))
    }

    fn integrate_checked<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Estimate, FellerError> {
        if lo >= hi {
            return Ok(Estimate { value: 0.0, error_estimate: 0.0 });
        }
        let r = integrate_with(&f, lo, hi, self.tol(), self.policy.max_subdivisions)?;
        if !r.converged {
            return Err(FellerError::NotConverged { value: r.value, error_estimate: r.error_estimate });
        }
        Ok(Estimate { value: r.value, error_estimate: r.error_estimate })
    }

    /// `p(y)·m(y)` style integrands are evaluated pointwise; evaluation
    /// failures surface as NaN and are reported by the quadrature.
    fn pm(&self, y: f64) -> (f64, f64) {
        match (self.p(y), self.m(y)) {
            (Ok(p), Ok(m)) => (p, m),
            _ => (f64::NAN, f64::NAN),
        }
    }

    /// Expected exit time of `(a, b)` from `x`.
    pub fn expected_exit_time(&self, x: f64, a: f64, b: f64) -> Result<Estimate, FellerError> {
        self.check_triple(x, a, b)?;
        if x == a || x == b {
            return Ok(Estimate { value: 0.0, error_estimate: 0.0 });
        }
        let (pa, pb) = (self.p(a)?, self.p(b)?);
        let u = self.hitting_probability(x, a, b)?;
        let left = self.integrate_checked(
            |y| {
                let (p, m) = self.pm(y);
                (p - pa) * m
            },
            a,
            x,
        )?;
        let right = self.integrate_checked(
            |y| {
                let (p, m) = self.pm(y);
                (pb - p) * m
            },
            x,
            b,
        )?;
        let value = (1.0 - u) * left.value + u * right.value;
        Ok(Estimate {
            value,
            error_estimate: (1.0 - u) * left.error_estimate + u * right.error_estimate + TABLE_REL_ERROR * value.abs(),
        })
    }

    /// Expected exit time through the Green kernel of the scale-transformed
    /// process: `∫_a^b G(p(x), p(z)) m(z) dz`.
    pub fn green_exit_time(&self, x: f64, a: f64, b: f64) -> Result<Estimate, FellerError> {
        self.check_triple(x, a, b)?;
        if x == a || x == b {
            return Ok(Estimate { value: 0.0, error_estimate: 0.0 });
        }
        let (ta, tb, y) = (self.p(a)?, self.p(b)?, self.p(x)?);
        let green = move |w: f64| (y.min(w) - ta) * (tb - y.max(w)) / (tb - ta);
        let kernel = |z: f64| {
            let (p, m) = self.pm(z);
            green(p) * m
        };
        let left = self.integrate_checked(kernel, a, x)?;
        let right = self.integrate_checked(kernel, x, b)?;
        let value = left.value + right.value;
        Ok(Estimate {
            value,
            error_estimate: left.error_estimate + right.error_estimate + TABLE_REL_ERROR * value.abs(),
        })
    }

    /// Smallest increment of `p` over an `n`-point grid spanning the part of
    /// the subinterval covered by the table; positive means increasing.
    pub fn min_scale_increment(&self, n: usize) -> Result<f64, FellerError> {
        let lo = self.anchors.first().map(|a| a.x).unwrap_or(self.c);
        let hi = self.anchors.last().map(|a| a.x).unwrap_or(self.c);
        let (lo, hi) = (lo.max(self.c - 50.0), hi.min(self.c + 50.0));
        let n = n.max(2);
        let mut prev = self.p(lo)?;
        let mut worst = f64::INFINITY;
        for i in 1..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = self.p(x)?;
            if v.is_finite() && prev.is_finite() {
                worst = worst.min(v - prev);
            }
            prev = v;
        }
        Ok(worst)
    }

    fn side_of(&self, endpoint: f64) -> Result<Side, FellerError> {
        if endpoint == self.interval.left {
            Ok(Side::Left)
        } else if endpoint == self.interval.right {
            Ok(Side::Right)
        } else {
            Err(FellerError::NotEndpoint { endpoint, interval: self.interval })
        }
    }

    /// Boundary nature of `endpoint` from the limit of `p` and the
    /// integrability of `m`; attainability of attractive points from the
    /// limit of expected exit times.
    pub fn classify_boundary(&self, endpoint: f64) -> Result<BoundaryVerdict, FellerError> {
        let side = self.side_of(endpoint)?;
        let policy = &self.policy.limit;
        let c = self.c;
        let scale = limit_at_boundary(|x| self.p(x).unwrap_or(f64::NAN), endpoint, c, policy)?;
        let mut verdict = BoundaryVerdict {
            endpoint,
            side,
            nature: Nature::Unknown,
            attainable: Attainability::Unknown,
            evidence: BoundaryEvidence { scale_limit: Some(scale.clone()), ..BoundaryEvidence::default() },
        };
        match scale.kind {
            LimitKind::Finite { .. } => {
                verdict.nature = Nature::Attractive;
                // attainability is secondary: a failed exit-time limit leaves it
                // undecided instead of discarding the nature verdict
                if let Ok(exit) = self.exit_time_limit(endpoint) {
                    verdict.attainable = match exit.kind {
                        LimitKind::Finite { .. } => Attainability::Yes,
                        LimitKind::Infinite => Attainability::No,
                        LimitKind::Inconclusive => Attainability::Unknown,
                    };
                    verdict.evidence.exit_time_limit = Some(exit);
                }
            }
            LimitKind::Infinite => {
                let speed = improper_limit(|x| self.m(x).unwrap_or(f64::NAN), endpoint, c, policy)?;
                verdict.nature = match speed.kind {
                    LimitKind::Finite { .. } => Nature::StronglyRepulsive,
                    LimitKind::Infinite => Nature::Repulsive,
                    LimitKind::Inconclusive => Nature::Unknown,
                };
                verdict.attainable = Attainability::No;
                verdict.evidence.speed_integral = Some(speed);
            }
            LimitKind::Inconclusive => {}
        }
        Ok(verdict)
    }

    /// Expected exit time from a fixed start of `(b_k, c)` (or `(c, b_k)`)
    /// as `b_k` approaches the endpoint.
    fn exit_time_limit(&self, endpoint: f64) -> Result<ImproperVerdict, FellerError> {
        let c = self.c;
        let x = if endpoint.is_infinite() { c + 0.5 * endpoint.signum() } else { 0.5 * (c + endpoint) };
        // stage points are validated here so that errors are not hidden as NaN
        stage_points(endpoint, c, &self.policy.limit)?;
        let t = |bk: f64| {
            let r = if bk < c { self.expected_exit_time(x, bk, c) } else { self.expected_exit_time(x, c, bk) };
            match r {
                Ok(e) => e.value,
                // slow slices still carry a usable value for the stage sequence
                Err(FellerError::NotConverged { value, .. }) => value,
                Err(_) => f64::NAN,
            }
        };
        let policy = LimitPolicy { cauchy_rel: self.policy.attainability_cauchy_rel, ..self.policy.limit };
        Ok(limit_at_boundary(t, endpoint, c, &policy)?)
    }

    /// `∫ m` over the whole subinterval, if both tails are integrable.
    pub fn speed_mass(&self) -> Result<f64, FellerError> {
        let mut total = 0.0;
        for end in [self.interval.left, self.interval.right] {
            let v = improper_limit(|x| self.m(x).unwrap_or(f64::NAN), end, self.c, &self.policy.limit)?;
            total += v.finite_value().ok_or(FellerError::SpeedNotIntegrable { endpoint: end })?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nature {
    Attractive,
    Repulsive,
    StronglyRepulsive,
    Unknown,
}

impl Nature {
    pub fn is_repulsive(self) -> bool {
        matches!(self, Nature::Repulsive | Nature::StronglyRepulsive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attainability {
    Yes,
    No,
    Unknown,
}

/// Exponent arithmetic behind a power-law verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawEvidence {
    /// `1 + β - 2ς`
    pub exponent_gap: f64,
    /// `c_σ² - 2c_b`
    pub noise_excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundaryEvidence {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_limit: Option<ImproperVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_integral: Option<ImproperVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_time_limit: Option<ImproperVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub powerlaw: Option<PowerLawEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryVerdict {
    #[serde(with = "extended_real")]
    pub endpoint: f64,
    pub side: Side,
    pub nature: Nature,
    pub attainable: Attainability,
    pub evidence: BoundaryEvidence,
}

impl BoundaryVerdict {
    /// Finite limit of the scale function at the endpoint, if any.
    pub fn scale_limit(&self) -> Option<f64> {
        self.evidence.scale_limit.as_ref().and_then(|v| v.finite_value())
    }

    /// Mass of `m` between the reference point and the endpoint, if finite.
    pub fn speed_mass(&self) -> Option<f64> {
        self.evidence.speed_integral.as_ref().and_then(|v| v.finite_value())
    }
}

/// Sign of `x - y`, with differences within a few ulps read as ties so that
/// decimal inputs such as `β = 0.2`, `ς = 0.6` land on the critical case.
fn tie_aware_sign(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d.abs() <= 8.0 * f64::EPSILON * (x.abs() + y.abs()) {
        0.0
    } else {
        d.signum()
    }
}

/// Nature of Δ for the local model `b = sgn(x-Δ) c_b |x-Δ|^β`,
/// `σ = c_σ |x-Δ|^ς`, by exponent comparison.
pub fn classify_powerlaw(profile: &PowerLawProfile) -> BoundaryVerdict {
    let PowerLawProfile { delta, beta, varsigma, c_b, c_sigma } = *profile;
    let gap = tie_aware_sign(1.0 + beta, 2.0 * varsigma);
    let excess = tie_aware_sign(c_sigma * c_sigma, 2.0 * c_b);
    let nature = if gap > 0.0 || (gap == 0.0 && excess > 0.0) {
        Nature::Attractive
    } else if (gap == 0.0 && excess < 0.0 && beta == 1.0) || (gap < 0.0 && excess <= 0.0 && beta > 0.0 && beta <= 1.0) {
        Nature::StronglyRepulsive
    } else {
        Nature::Unknown
    };
    BoundaryVerdict {
        endpoint: delta,
        side: Side::Left,
        nature,
        attainable: Attainability::Unknown,
        evidence: BoundaryEvidence {
            powerlaw: Some(PowerLawEvidence {
                exponent_gap: 1.0 + beta - 2.0 * varsigma,
                noise_excess: c_sigma * c_sigma - 2.0 * c_b,
            }),
            ..BoundaryEvidence::default()
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErgodicVerdict {
    ConvergeToLeft,
    ConvergeToRight,
    /// Both ends attractive; `prob_left` is for the start `x0`.
    RandomBoundaryLimit {
        x0: f64,
        prob_left: f64,
        p_left: f64,
        p_right: f64,
    },
    /// Invariant law `m / normalizer` on the subinterval.
    PositiveRecurrent {
        normalizer: f64,
    },
    /// Null recurrent with occupation measure concentrating at the simply
    /// repulsive end.
    NullRecurrentDirac {
        #[serde(with = "extended_real")]
        endpoint: f64,
    },
    NullRecurrentBoundarySupport,
    Undetermined,
}

impl ErgodicVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            Self::ConvergeToLeft => "converge_to_left",
            Self::ConvergeToRight => "converge_to_right",
            Self::RandomBoundaryLimit { .. } => "random_boundary_limit",
            Self::PositiveRecurrent { .. } => "positive_recurrent",
            Self::NullRecurrentDirac { .. } => "null_recurrent_dirac",
            Self::NullRecurrentBoundarySupport => "null_recurrent_boundary_support",
            Self::Undetermined => "undetermined",
        }
    }
}

/// Long-run behaviour on the table's subinterval from the two boundary
/// verdicts.
pub fn ergodic_verdict(
    left: &BoundaryVerdict,
    right: &BoundaryVerdict,
    table: &ScaleSpeedTable,
    x0: f64,
) -> Result<ErgodicVerdict, FellerError> {
    use Nature::*;
    Ok(match (left.nature, right.nature) {
        (Unknown, _) | (_, Unknown) => ErgodicVerdict::Undetermined,
        (Attractive, r) if r.is_repulsive() => ErgodicVerdict::ConvergeToLeft,
        (l, Attractive) if l.is_repulsive() => ErgodicVerdict::ConvergeToRight,
        (Attractive, Attractive) => {
            let (pl, pr) = match (left.scale_limit(), right.scale_limit()) {
                (Some(pl), Some(pr)) => (pl, pr),
                _ => return Ok(ErgodicVerdict::Undetermined),
            };
            let px = table.p(x0)?;
            ErgodicVerdict::RandomBoundaryLimit {
                x0,
                prob_left: ((pr - px) / (pr - pl)).clamp(0.0, 1.0),
                p_left: pl,
                p_right: pr,
            }
        }
        (StronglyRepulsive, StronglyRepulsive) => match (left.speed_mass(), right.speed_mass()) {
            (Some(a), Some(b)) => ErgodicVerdict::PositiveRecurrent { normalizer: a + b },
            _ => ErgodicVerdict::Undetermined,
        },
        (StronglyRepulsive, Repulsive) => ErgodicVerdict::NullRecurrentDirac { endpoint: right.endpoint },
        (Repulsive, StronglyRepulsive) => ErgodicVerdict::NullRecurrentDirac { endpoint: left.endpoint },
        _ => ErgodicVerdict::NullRecurrentBoundarySupport,
    })
}

/// Classification of one subinterval between degenerate points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubintervalAnalysis {
    pub interval: Interval,
    pub reference: f64,
    pub left: BoundaryVerdict,
    pub right: BoundaryVerdict,
    pub ergodic: ErgodicVerdict,
}

/// Classifies both ends of every subinterval of `spec`, using the default
/// reference point as the start for random-limit probabilities.
pub fn analyze(spec: &DiffusionSpec, policy: FellerPolicy) -> Result<Vec<SubintervalAnalysis>, FellerError> {
    spec.subintervals()
        .into_iter()
        .map(|interval| {
            let table = ScaleSpeedTable::on_subinterval(spec, interval, policy)?;
            let left = table.classify_boundary(interval.left)?;
            let right = table.classify_boundary(interval.right)?;
            let ergodic = ergodic_verdict(&left, &right, &table, table.reference())?;
            Ok(SubintervalAnalysis { interval, reference: table.reference(), left, right, ergodic })
        })
        .collect()
}
