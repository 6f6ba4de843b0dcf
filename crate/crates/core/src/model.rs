//! Diffusion specifications `dX = b(X) dt + σ(X) dB` on an open interval,
//! the local power-law model around a degenerate point, and the built-in
//! example models.
//!
//! Coefficients are plain callables. A spec is immutable once built and can
//! be shared across threads; every coefficient must be re-entrant.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalar coefficient `x ↦ f(x)`.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default number of grid points used by [`validate_spec`].
pub const DEFAULT_VALIDATION_GRID: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter { name: &'static str, value: f64, reason: &'static str },
    #[error("power-law glue is discontinuous at x = {x}: local {local} vs outer {outer}")]
    Glue { x: f64, local: f64, outer: f64 },
}

/// Serde helpers for extended reals: finite numbers stay numbers, infinities
/// are written as the strings `"inf"` / `"-inf"`.
pub mod extended_real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct ExtVisitor;
        impl Visitor<'_> for ExtVisitor {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"+inf\", \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v.trim() {
                    "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
                    "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                    other => other.parse::<f64>().map_err(|_| E::custom(format!("not an extended real: {other:?}"))),
                }
            }
        }
        d.deserialize_any(ExtVisitor)
    }
}

/// Open interval `]left, right[` with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "extended_real")]
    pub left: f64,
    #[serde(with = "extended_real")]
    pub right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Result<Self, ModelError> {
        let iv = Self { left, right };
        iv.check()?;
        Ok(iv)
    }

    pub fn real_line() -> Self {
        Self { left: f64::NEG_INFINITY, right: f64::INFINITY }
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.left.is_nan() || self.right.is_nan() {
            return Err(ModelError::InvalidSpec("interval endpoint is NaN".into()));
        }
        if self.left == f64::INFINITY || self.right == f64::NEG_INFINITY {
            return Err(ModelError::InvalidSpec(format!(
                "interval ]{}, {}[ has a misplaced infinite endpoint",
                self.left, self.right
            )));
        }
        if self.left >= self.right {
            return Err(ModelError::InvalidSpec(format!("empty interval ]{}, {}[", self.left, self.right)));
        }
        Ok(())
    }

    /// Strict (open) membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.left && x < self.right
    }

    pub fn is_bounded(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }

    /// Default reference point: the midpoint of a bounded interval, one unit
    /// inside a half-line, and 0 on the whole line.
    pub fn default_reference(&self) -> f64 {
        match (self.left.is_finite(), self.right.is_finite()) {
            (true, true) => 0.5 * (self.left + self.right),
            (true, false) => self.left + 1.0,
            (false, true) => self.right - 1.0,
            (false, false) => 0.0,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "]{}, {}[", self.left, self.right)
    }
}

/// Local model `b(x) = sgn(x-Δ)·c_b·|x-Δ|^β`, `σ(x) = c_σ·|x-Δ|^ς` near Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawProfile {
    pub delta: f64,
    pub beta: f64,
    pub varsigma: f64,
    pub c_b: f64,
    pub c_sigma: f64,
}

impl PowerLawProfile {
    pub fn new(delta: f64, beta: f64, varsigma: f64, c_b: f64, c_sigma: f64) -> Result<Self, ModelError> {
        let p = Self { delta, beta, varsigma, c_b, c_sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ModelError::Parameter { name, value, reason: "must be a positive finite real" })
            }
        };
        if !self.delta.is_finite() {
            return Err(ModelError::Parameter { name: "delta", value: self.delta, reason: "must be finite" });
        }
        positive("beta", self.beta)?;
        positive("c_b", self.c_b)?;
        positive("c_sigma", self.c_sigma)?;
        if !(self.varsigma.is_finite() && self.varsigma >= 1.0) {
            return Err(ModelError::Parameter { name: "varsigma", value: self.varsigma, reason: "must be >= 1" });
        }
        Ok(())
    }

    pub fn drift(&self, x: f64) -> f64 {
        let t = x - self.delta;
        if t == 0.0 {
            0.0
        } else {
            t.signum() * self.c_b * t.abs().powf(self.beta)
        }
    }

    pub fn sigma(&self, x: f64) -> f64 {
        self.c_sigma * (x - self.delta).abs().powf(self.varsigma)
    }

    /// The pure power-law diffusion on the whole line, degenerate at Δ.
    pub fn local_spec(&self) -> DiffusionSpec {
        let p = *self;
        DiffusionSpec {
            name: format!(
                "powerlaw(delta={}, beta={}, varsigma={}, c_b={}, c_sigma={})",
                p.delta, p.beta, p.varsigma, p.c_b, p.c_sigma
            ),
            interval: Interval::real_line(),
            drift: Arc::new(move |x| p.drift(x)),
            sigma: Arc::new(move |x| p.sigma(x)),
            degenerate_points: vec![p.delta],
            profile: Some(p),
            growth: None,
        }
    }
}

/// Sublinear growth constants: `b² ≤ C_b(1+|x|)`, `σ² ≤ C_σ(1+|x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub c_b: f64,
    pub c_sigma: f64,
}

#[derive(Clone)]
pub struct DiffusionSpec {
    pub name: String,
    pub interval: Interval,
    pub drift: Coefficient,
    pub sigma: Coefficient,
    /// Interior points where `b = σ = 0`, strictly increasing.
    pub degenerate_points: Vec<f64>,
    pub profile: Option<PowerLawProfile>,
    pub growth: Option<GrowthBounds>,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("name", &self.name)
            .field("interval", &self.interval)
            .field("degenerate_points", &self.degenerate_points)
            .field("profile", &self.profile)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl DiffusionSpec {
    pub fn new<B, S>(
        name: impl Into<String>,
        interval: Interval,
        drift: B,
        sigma: S,
        degenerate_points: Vec<f64>,
    ) -> Result<Self, ModelError>
    where
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let spec = Self {
            name: name.into(),
            interval,
            drift: Arc::new(drift),
            sigma: Arc::new(sigma),
            degenerate_points,
            profile: None,
            growth: None,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn with_growth_bounds(mut self, growth: GrowthBounds) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn with_degenerate_points(mut self, points: Vec<f64>) -> Result<Self, ModelError> {
        self.degenerate_points = points;
        self.check_structure()?;
        Ok(self)
    }

    pub fn with_interval(mut self, interval: Interval) -> Result<Self, ModelError> {
        self.interval = interval;
        self.check_structure()?;
        Ok(self)
    }

    fn check_structure(&self) -> Result<(), ModelError> {
        self.interval.check()?;
        for &d in &self.degenerate_points {
            if !self.interval.contains(d) {
                return Err(ModelError::InvalidSpec(format!(
                    "degenerate point {d} is not interior to {}",
                    self.interval
                )));
            }
        }
        if self.degenerate_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidSpec("degenerate points must be strictly increasing".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    /// The open subintervals cut out by the degenerate points.
    pub fn subintervals(&self) -> Vec<Interval> {
        let mut cuts = Vec::with_capacity(self.degenerate_points.len() + 2);
        cuts.push(self.interval.left);
        cuts.extend_from_slice(&self.degenerate_points);
        cuts.push(self.interval.right);
        cuts.windows(2).map(|w| Interval { left: w[0], right: w[1] }).collect()
    }

    /// Subinterval containing `x`, or `None` when `x` is degenerate or outside.
    pub fn subinterval_containing(&self, x: f64) -> Option<Interval> {
        self.subintervals().into_iter().find(|iv| iv.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// σ is exactly zero at a sampled point that is not declared degenerate.
    SigmaVanishes {
        x: f64,
    },
    /// σ changes sign between two consecutive samples with no declared
    /// degenerate point in between, so it vanishes somewhere there.
    SigmaSignChange {
        left: f64,
        right: f64,
    },
    NonFinite {
        x: f64,
        coefficient: &'static str,
    },
    GrowthBound {
        x: f64,
        coefficient: &'static str,
        value: f64,
        bound: f64,
    },
}

impl Violation {
    /// Representative abscissa of the violation.
    pub fn location(&self) -> f64 {
        match *self {
            Violation::SigmaVanishes { x } => x,
            Violation::SigmaSignChange { left, right } => 0.5 * (left + right),
            Violation::NonFinite { x, .. } => x,
            Violation::GrowthBound { x, .. } => x,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub grid_size: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sampling window used for grid checks: the interval itself when bounded,
/// otherwise clipped to a window of width at least 20 around the origin.
pub(crate) fn sampling_window(iv: &Interval) -> (f64, f64) {
    let lo = if iv.left.is_finite() {
        iv.left
    } else if iv.right.is_finite() {
        (iv.right - 20.0).min(-10.0)
    } else {
        -10.0
    };
    let hi = if iv.right.is_finite() { iv.right } else { (lo + 20.0).max(10.0) };
    (lo, hi)
}

/// Grid check of the standing assumptions: σ does not vanish off the declared
/// degenerate points, coefficients are finite, and growth bounds hold when
/// supplied.
pub fn validate_spec(spec: &DiffusionSpec, grid_size: usize) -> Result<ValidationReport, ModelError> {
    if grid_size < 2 {
        return Err(ModelError::Parameter { name: "grid_size", value: grid_size as f64, reason: "must be at least 2" });
    }
    spec.check_structure()?;
    let (lo, hi) = sampling_window(&spec.interval);
    let h = (hi - lo) / grid_size as f64;
    let mut violations = Vec::new();
    let is_declared = |x: f64| spec.degenerate_points.contains(&x);
    let declared_between = |a: f64, b: f64| spec.degenerate_points.iter().any(|&d| d >= a && d <= b);

    let mut prev: Option<(f64, f64)> = None;
    for i in 0..grid_size {
        let x = lo + h * (i as f64 + 0.5);
        let b = spec.drift(x);
        let s = spec.sigma(x);
        if !b.is_finite() {
            violations.push(Violation::NonFinite { x, coefficient: "drift" });
        }
        if !s.is_finite() {
            violations.push(Violation::NonFinite { x, coefficient: "sigma" });
            prev = None;
            continue;
        }
        if s == 0.0 && !is_declared(x) {
            violations.push(Violation::SigmaVanishes { x });
        }
        if let Some((px, ps)) = prev {
            if ps * s < 0.0 && !declared_between(px, x) {
                violations.push(Violation::SigmaSignChange { left: px, right: x });
            }
        }
        prev = Some((x, s));

        if let Some(g) = spec.growth {
            let bound_b = g.c_b * (1.0 + x.abs());
            if b * b > bound_b {
                violations.push(Violation::GrowthBound { x, coefficient: "drift", value: b * b, bound: bound_b });
            }
            let bound_s = g.c_sigma * (1.0 + x.abs());
            if s * s > bound_s {
                violations.push(Violation::GrowthBound { x, coefficient: "sigma", value: s * s, bound: bound_s });
            }
        }
    }
    Ok(ValidationReport { grid_size, violations })
}

/// Drift of the double-well example: `b = -V'` with three critical points
/// `-3, 0, 3`.
pub fn paper_example_drift(x: f64) -> f64 {
    if x.abs() >= 3.0 {
        -2.0 * (x - 3.0 * x.signum())
    } else {
        -x * x * x / 18.0 + 0.5 * x
    }
}

/// Double-well drift with multiplicative noise `σ(x) = c·x`, degenerate at 0.
pub fn make_paper_example(c: f64) -> Result<DiffusionSpec, ModelError> {
    if !(c > 0.0 && c < 2.0) {
        return Err(ModelError::Parameter { name: "c", value: c, reason: "must lie in (0, 2)" });
    }
    Ok(DiffusionSpec {
        name: format!("paper-example(c={c})"),
        interval: Interval::real_line(),
        drift: Arc::new(paper_example_drift),
        sigma: Arc::new(move |x| c * x),
        degenerate_points: vec![0.0],
        profile: None,
        growth: None,
    })
}

/// Ornstein–Uhlenbeck process `dX = -rate·X dt + sigma dB` on the whole line.
pub fn ornstein_uhlenbeck(rate: f64, sigma: f64) -> Result<DiffusionSpec, ModelError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ModelError::Parameter { name: "rate", value: rate, reason: "must be positive" });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ModelError::Parameter { name: "sigma", value: sigma, reason: "must be positive" });
    }
    Ok(DiffusionSpec {
        name: format!("ornstein-uhlenbeck(rate={rate}, sigma={sigma})"),
        interval: Interval::real_line(),
        drift: Arc::new(move |x| -rate * x),
        sigma: Arc::new(move |_| sigma),
        degenerate_points: Vec::new(),
        profile: None,
        growth: None,
    })
}

pub fn brownian(sigma: f64) -> Result<DiffusionSpec, ModelError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ModelError::Parameter { name: "sigma", value: sigma, reason: "must be positive" });
    }
    Ok(DiffusionSpec {
        name: format!("brownian(sigma={sigma})"),
        interval: Interval::real_line(),
        drift: Arc::new(|_| 0.0),
        sigma: Arc::new(move |_| sigma),
        degenerate_points: Vec::new(),
        profile: None,
        growth: None,
    })
}

/// Attractive boundary with a finite speed measure: on `]0, 1]`,
/// `b = √x/2` and `σ = c·x^{3/4}`; continued for `x > 1` by a
/// mean-reverting linear drift and constant σ (continuous at 1).
pub fn example_one(c: f64) -> Result<DiffusionSpec, ModelError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ModelError::Parameter { name: "c", value: c, reason: "must be positive" });
    }
    Ok(DiffusionSpec {
        name: format!("example-one(c={c})"),
        interval: Interval::new(0.0, f64::INFINITY)?,
        drift: Arc::new(|x: f64| if x <= 1.0 { 0.5 * x.sqrt() } else { 0.5 - (x - 1.0) }),
        sigma: Arc::new(move |x: f64| if x <= 1.0 { c * x.powf(0.75) } else { c }),
        degenerate_points: Vec::new(),
        profile: None,
        growth: None,
    })
}

/// How the local power law is glued onto the outer coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlueOptions {
    /// Half-width of the neighborhood of Δ where the power law applies.
    pub radius: f64,
    /// Width of the linear blend band, as a fraction of `radius`.
    pub band_fraction: f64,
    /// Largest admissible mismatch at the junction, relative to `max(1, |outer|)`.
    pub tolerance: f64,
}

impl Default for GlueOptions {
    fn default() -> Self {
        Self { radius: 1.0, band_fraction: 0.01, tolerance: 0.05 }
    }
}

/// Power law within `radius` of Δ, `outer` beyond `radius·(1+band)`, and a
/// linear blend in between.
pub fn make_powerlaw_spec(
    profile: PowerLawProfile,
    outer: &DiffusionSpec,
    glue: GlueOptions,
) -> Result<DiffusionSpec, ModelError> {
    profile.validate()?;
    if !(glue.radius > 0.0 && glue.band_fraction > 0.0 && glue.tolerance >= 0.0) {
        return Err(ModelError::InvalidSpec(format!("invalid glue options {glue:?}")));
    }
    let delta = profile.delta;
    if !outer.interval.contains(delta) {
        return Err(ModelError::InvalidSpec(format!("power-law point {delta} is not interior to {}", outer.interval)));
    }
    let r = glue.radius;
    let r_out = r * (1.0 + glue.band_fraction);
    // only σ² enters the dynamics: follow the sign convention of `outer`
    let side_sign = |x: f64| {
        if outer.interval.contains(x) && outer.sigma(x) < 0.0 {
            -1.0
        } else {
            1.0
        }
    };
    let (sign_left, sign_right) = (side_sign(delta - r), side_sign(delta + r));
    let local_sigma = move |x: f64| {
        let s = if x < delta { sign_left } else { sign_right };
        s * profile.sigma(x)
    };
    for x in [delta - r, delta + r] {
        if !outer.interval.contains(x) {
            continue;
        }
        for (local, out) in [(profile.drift(x), outer.drift(x)), (local_sigma(x), outer.sigma(x))] {
            if (local - out).abs() > glue.tolerance * out.abs().max(1.0) {
                return Err(ModelError::Glue { x, local, outer: out });
            }
        }
    }

    let blend = move |local: f64, out: f64, t: f64| {
        if t <= r {
            local
        } else if t >= r_out {
            out
        } else {
            let w = (t - r) / (r_out - r);
            (1.0 - w) * local + w * out
        }
    };
    let outer_b = outer.drift.clone();
    let outer_s = outer.sigma.clone();
    let drift = move |x: f64| {
        let t = (x - delta).abs();
        if t <= r {
            profile.drift(x)
        } else {
            blend(profile.drift(x), outer_b(x), t)
        }
    };
    let sigma = move |x: f64| {
        let t = (x - delta).abs();
        if t <= r {
            local_sigma(x)
        } else {
            blend(local_sigma(x), outer_s(x), t)
        }
    };

    let mut points: Vec<f64> = outer.degenerate_points.iter().copied().filter(|d| (d - delta).abs() > r_out).collect();
    points.push(delta);
    points.sort_by(f64::total_cmp);

    Ok(DiffusionSpec {
        name: format!("powerlaw[{}]", outer.name),
        interval: outer.interval,
        drift: Arc::new(drift),
        sigma: Arc::new(sigma),
        degenerate_points: points,
        profile: Some(profile),
        growth: None,
    })
}

/// Reads `(β, c_b)` and `(ς, c_σ)` back from least-squares log-log fits of
/// `|b|` and `|σ|` on a geometric grid of distances to Δ in `[t_min, t_max]`.
pub fn estimate_powerlaw(
    spec: &DiffusionSpec,
    delta: f64,
    t_min: f64,
    t_max: f64,
) -> Result<PowerLawProfile, ModelError> {
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(ModelError::InvalidSpec(format!("bad fitting window [{t_min}, {t_max}]")));
    }
    const POINTS: usize = 64;
    let mut lt = Vec::with_capacity(2 * POINTS);
    let mut lb = Vec::with_capacity(2 * POINTS);
    let mut ls = Vec::with_capacity(2 * POINTS);
    for side in [-1.0, 1.0] {
        for i in 0..POINTS {
            let t = t_min * (t_max / t_min).powf(i as f64 / (POINTS - 1) as f64);
            let x = delta + side * t;
            let b = spec.drift(x).abs();
            let s = spec.sigma(x).abs();
            if b > 0.0 && s > 0.0 && b.is_finite() && s.is_finite() {
                lt.push(t.ln());
                lb.push(b.ln());
                ls.push(s.ln());
            }
        }
    }
    if lt.len() < 4 {
        return Err(ModelError::InvalidSpec("coefficients vanish on the fitting window".into()));
    }
    let fit = |ys: &[f64]| {
        let n = lt.len() as f64;
        let mx = lt.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = lt.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lt.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        (slope, (my - slope * mx).exp())
    };
    let (beta, c_b) = fit(&lb);
    let (varsigma, c_sigma) = fit(&ls);
    Ok(PowerLawProfile { delta, beta, varsigma, c_b, c_sigma })
}
