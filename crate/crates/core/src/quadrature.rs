//! Adaptive Gauss–Kronrod integration and classification of improper
//! integrals and boundary limits as finite, infinite or inconclusive.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integration bounds must be finite with a < b (got [{a}, {b}])")]
    InvalidBounds { a: f64, b: f64 },
    #[error("integrand is not finite at x = {x} (value {value})")]
    NonFinite { x: f64, value: f64 },
    #[error("integrand changes sign near the endpoint ({left} vs {right})")]
    SignChange { left: f64, right: f64 },
    #[error("sequence is not monotone near the endpoint")]
    NotMonotone,
    #[error("reference point {c} is not strictly inside the range ending at {endpoint}")]
    BadReference { c: f64, endpoint: f64 },
}

/// Mixed tolerance: a result is accepted when `error ≤ max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn mixed(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }

    pub fn relative(rel: f64) -> Self {
        Self { abs: 1e-300, rel }
    }

    #[inline]
    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

/// Subdivision cap used by [`integrate`].
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 2_000;

// 15-point Kronrod extension of the 7-point Gauss rule; nodes in decreasing
// order, the last one is the centre. Odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[inline]
fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { x, value: v })
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Adaptive integration of `f` over `[a, b]` to the mixed tolerance
/// `max(tol, tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult, QuadError> {
    integrate_with(&f, a, b, Tolerance::mixed(tol), DEFAULT_MAX_SUBDIVISIONS)
}

/// Global adaptive bisection: the panel with the largest error estimate is
/// split until the summed error meets the tolerance or the cap is reached.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_subdivisions: usize,
) -> Result<QuadratureResult, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::InvalidBounds { a, b });
    }
    if a == b {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, subdivisions: 0, converged: true });
    }
    let first = gk15(f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;
    while error > tol.target(value) && subdivisions < max_subdivisions {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel is at floating-point resolution
            heap.push(worst);
            break;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        // keep the running sums honest once in a while
        if subdivisions % 64 == 0 {
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    value = heap.iter().map(|p| p.value).sum();
    error = heap.iter().map(|p| p.error).sum();
    Ok(QuadratureResult { value, error_estimate: error, subdivisions, converged: error <= tol.target(value) })
}

/// Thresholds for the geometric-stage limit classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitPolicy {
    /// Relative Cauchy tolerance on the (extrapolated) partial sequence.
    pub cauchy_rel: f64,
    /// Partials beyond this magnitude are declared infinite.
    pub divergence_threshold: f64,
    pub stages: usize,
    /// Geometric ratio of the distances to the endpoint between stages.
    pub ratio: f64,
    /// Increment exponents in `(critical_exact, critical_band)` are too close
    /// to the divergent regime to decide.
    pub critical_band: f64,
    /// Increment exponents at or below this are treated as non-decaying.
    pub critical_exact: f64,
    /// Accuracy requested for each stage integral.
    pub stage_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for LimitPolicy {
    fn default() -> Self {
        Self {
            cauchy_rel: 1e-8,
            divergence_threshold: 1e8,
            stages: 12,
            ratio: 0.25,
            critical_band: 0.05,
            critical_exact: 1e-4,
            stage_tolerance: 1e-12,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitKind {
    Finite { value: f64, error_estimate: f64 },
    Infinite,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    /// Abscissa at which the stage stops short of the endpoint.
    pub point: f64,
    pub partial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImproperVerdict {
    pub kind: LimitKind,
    pub stages: Vec<Stage>,
    /// For integrals: the exponent `a` of `f ~ t^a` in the closeness variable
    /// (`t` = distance to a finite endpoint, `1/x` at infinity), so finiteness
    /// means `a > -1`. For boundary limits: the exponent `g` of
    /// `|p(e) - p| ~ t^g`, finite limit meaning `g > 0`.
    pub tail_exponent: Option<f64>,
}

impl ImproperVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self.kind, LimitKind::Finite { .. })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.kind, LimitKind::Infinite)
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self.kind {
            LimitKind::Finite { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// Stage abscissae approaching `endpoint` from the reference point `c`.
pub fn stage_points(endpoint: f64, c: f64, policy: &LimitPolicy) -> Result<Vec<f64>, QuadError> {
    if !c.is_finite() || endpoint.is_nan() || c == endpoint {
        return Err(QuadError::BadReference { c, endpoint });
    }
    let q = policy.ratio;
    let pts = if endpoint.is_infinite() {
        let s = endpoint.signum();
        (0..policy.stages).map(|k| c + s * q.powi(-(k as i32))).collect()
    } else {
        let d = endpoint - c;
        (0..policy.stages).map(|k| endpoint - d * q.powi(k as i32 + 1)).collect()
    };
    Ok(pts)
}

/// Increments converging geometrically to a nonzero constant: a logarithmic
/// divergence with a power-law correction.
fn increments_settle_away_from_zero(d: &[f64]) -> bool {
    let n = d.len();
    if n < 4 {
        return false;
    }
    let dd: Vec<f64> = d[n - 4..].windows(2).map(|w| w[1] - w[0]).collect();
    if dd.contains(&0.0) || dd[0].signum() != dd[1].signum() || dd[1].signum() != dd[2].signum() {
        return false;
    }
    let r1 = dd[1] / dd[0];
    let r2 = dd[2] / dd[1];
    if !(r1 > 0.0 && r1 < 0.95 && r2 > 0.0 && r2 < 0.95) || (r2 - r1).abs() > 0.2 * r2 {
        return false;
    }
    let last = d[n - 1];
    let limit = last + dd[2] * r2 / (1.0 - r2);
    limit.signum() == last.signum() && limit.abs() >= 0.5 * last.abs()
}

/// Decision on a partial sequence from its last increments. `offset`
/// converts the increment exponent into the reported tail exponent.
fn classify_partials(partials: &[f64], policy: &LimitPolicy, offset: f64) -> (LimitKind, Option<f64>) {
    let k = partials.len();
    if k < 4 {
        return (LimitKind::Inconclusive, None);
    }
    let d: Vec<f64> = partials.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len();
    let last = partials[k - 1];
    let scale = last.abs().max(1.0);
    let ln_q = policy.ratio.ln();

    let (d1, d2, d3) = (d[n - 3], d[n - 2], d[n - 1]);
    let ratio_ok = |a: f64, b: f64| a != 0.0 && b != 0.0 && a.signum() == b.signum();

    // fast decay: the sequence has already settled
    if d3.abs() <= policy.cauchy_rel * scale && d3.abs() <= d2.abs() {
        let mut value = last;
        let mut exponent = None;
        if ratio_ok(d2, d3) {
            let rho = d3 / d2;
            if rho < 1.0 {
                value += d3 * rho / (1.0 - rho);
            }
            exponent = Some(rho.ln() / ln_q - offset);
        }
        return (LimitKind::Finite { value, error_estimate: d3.abs().max(f64::EPSILON * scale) }, exponent);
    }
    if !(ratio_ok(d1, d2) && ratio_ok(d2, d3)) {
        return (LimitKind::Inconclusive, None);
    }
    let rho_prev = d2 / d1;
    let rho = d3 / d2;
    let gamma = rho.ln() / ln_q;
    let exponent = Some(gamma - offset);
    if gamma <= policy.critical_exact || increments_settle_away_from_zero(&d) {
        return (LimitKind::Infinite, exponent);
    }
    if gamma < policy.critical_band || rho_prev >= 1.0 {
        return (LimitKind::Inconclusive, exponent);
    }
    let extrapolate = |s: f64, inc: f64, r: f64| s + inc * r / (1.0 - r);
    let l_prev = extrapolate(partials[k - 2], d2, rho_prev);
    let l_last = extrapolate(last, d3, rho);
    let err = (l_last - l_prev).abs();
    if err <= policy.cauchy_rel * l_last.abs().max(1.0) {
        (LimitKind::Finite { value: l_last, error_estimate: err.max(f64::EPSILON * l_last.abs()) }, exponent)
    } else {
        (LimitKind::Inconclusive, exponent)
    }
}

/// Classifies `∫ f` between the reference point `c` and `endpoint` (finite or
/// infinite) as finite, infinite or inconclusive, integrating over slices
/// that approach the endpoint geometrically. The value is the integral over
/// the range between the two points taken in increasing order.
pub fn improper_limit<F: Fn(f64) -> f64>(
    f: F,
    endpoint: f64,
    c: f64,
    policy: &LimitPolicy,
) -> Result<ImproperVerdict, QuadError> {
    let points = stage_points(endpoint, c, policy)?;
    let tol = Tolerance::relative(policy.stage_tolerance);

    let mut stages = Vec::with_capacity(points.len());
    let mut partial = 0.0;
    let mut prev = c;
    let mut sign_ref: Option<(f64, f64)> = None;
    let mut loose = false;
    for &pt in &points {
        let fv = f(pt);
        if fv.is_finite() && fv != 0.0 {
            match sign_ref {
                Some((x0, f0)) if f0.signum() != fv.signum() => {
                    return Err(QuadError::SignChange { left: x0, right: pt });
                }
                None => sign_ref = Some((pt, fv)),
                _ => {}
            }
        }
        let (lo, hi) = if prev < pt { (prev, pt) } else { (pt, prev) };
        let slice = integrate_with(&f, lo, hi, tol, policy.max_subdivisions)?;
        if !slice.converged && slice.error_estimate > 1e-6 * slice.value.abs().max(1e-300) {
            loose = true;
        }
        partial += slice.value;
        stages.push(Stage { point: pt, partial });
        prev = pt;
        if partial.abs() > policy.divergence_threshold {
            return Ok(ImproperVerdict { kind: LimitKind::Infinite, stages, tail_exponent: None });
        }
    }
    let partials: Vec<f64> = stages.iter().map(|s| s.partial).collect();
    let (mut kind, tail_exponent) = classify_partials(&partials, policy, 1.0);
    if loose && matches!(kind, LimitKind::Finite { .. }) {
        kind = LimitKind::Inconclusive;
    }
    Ok(ImproperVerdict { kind, stages, tail_exponent })
}

/// Classifies `lim p(x)` as `x` approaches `endpoint` from the reference `c`.
pub fn limit_at_boundary<F: Fn(f64) -> f64>(
    p: F,
    endpoint: f64,
    c: f64,
    policy: &LimitPolicy,
) -> Result<ImproperVerdict, QuadError> {
    let points = stage_points(endpoint, c, policy)?;
    let mut stages = Vec::with_capacity(points.len());
    let mut direction = 0.0;
    for &pt in &points {
        let v = p(pt);
        if v.is_nan() {
            return Err(QuadError::NonFinite { x: pt, value: v });
        }
        if let Some(last) = stages.last().map(|s: &Stage| s.partial) {
            let step: f64 = v - last;
            if step != 0.0 {
                if direction == 0.0 {
                    direction = step.signum();
                } else if step.signum() != direction {
                    return Err(QuadError::NotMonotone);
                }
            }
        }
        stages.push(Stage { point: pt, partial: v });
        if v.abs() > policy.divergence_threshold {
            return Ok(ImproperVerdict { kind: LimitKind::Infinite, stages, tail_exponent: None });
        }
    }
    let partials: Vec<f64> = stages.iter().map(|s| s.partial).collect();
    let (kind, tail_exponent) = classify_partials(&partials, policy, 0.0);
    Ok(ImproperVerdict { kind, stages, tail_exponent })
}
