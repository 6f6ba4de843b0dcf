//! Grid verification of Lyapunov-type boundary criteria and of the
//! hypotheses used for the Euler scheme near a degenerate point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feller::{FellerError, ScaleSpeedTable};
use crate::model::{DiffusionSpec, Interval};
use crate::quadrature::{improper_limit, integrate_with, Tolerance};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("candidate vanishes at x = {x}, away from the degenerate point")]
    ZeroValue { x: f64 },
    #[error("non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error(transparent)]
    Feller(#[from] FellerError),
}

/// Test function with caller-supplied first and second derivatives.
#[derive(Clone)]
pub struct LyapunovCandidate {
    pub name: String,
    pub v: RealFn,
    pub v_prime: RealFn,
    pub v_second: RealFn,
    pub neighborhood: Interval,
    /// Point the candidate is built around (may be ±∞).
    pub delta: f64,
}

impl fmt::Debug for LyapunovCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCandidate")
            .field("name", &self.name)
            .field("neighborhood", &self.neighborhood)
            .field("delta", &self.delta)
            .finish_non_exhaustive()
    }
}

impl LyapunovCandidate {
    pub fn new<V, D1, D2>(
        name: impl Into<String>,
        v: V,
        v_prime: D1,
        v_second: D2,
        neighborhood: Interval,
        delta: f64,
    ) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            v: Arc::new(v),
            v_prime: Arc::new(v_prime),
            v_second: Arc::new(v_second),
            neighborhood,
            delta,
        }
    }

    /// `(x - Δ)²`
    pub fn square(delta: f64, neighborhood: Interval) -> Self {
        Self::new(
            "square",
            move |x| (x - delta) * (x - delta),
            move |x| 2.0 * (x - delta),
            |_| 2.0,
            neighborhood,
            delta,
        )
    }

    /// `|x - Δ|·e^{|x - Δ|}` on one side of Δ.
    pub fn x_exp(delta: f64, neighborhood: Interval) -> Self {
        let s = if neighborhood.left >= delta { 1.0 } else { -1.0 };
        Self::new(
            "x_exp",
            move |x| {
                let t = s * (x - delta);
                t * t.exp()
            },
            move |x| {
                let t = s * (x - delta);
                s * (1.0 + t) * t.exp()
            },
            move |x| {
                let t = s * (x - delta);
                (2.0 + t) * t.exp()
            },
            neighborhood,
            delta,
        )
    }

    /// `|x - Δ|` on one side of Δ.
    pub fn distance(delta: f64, neighborhood: Interval) -> Self {
        let s = if neighborhood.left >= delta { 1.0 } else { -1.0 };
        Self::new("distance", move |x| s * (x - delta), move |_| s, |_| 0.0, neighborhood, delta)
    }

    fn is_one_sided(&self) -> bool {
        self.delta <= self.neighborhood.left || self.delta >= self.neighborhood.right
    }

    /// Log grid accumulating towards Δ over the neighborhood (both sides for
    /// a two-sided neighborhood).
    pub fn default_grid(&self, grid: GridSpec) -> Vec<f64> {
        let d = self.delta;
        let nb = self.neighborhood;
        if d.is_infinite() {
            return towards_infinity(nb, d, grid);
        }
        if self.is_one_sided() {
            let outer = if d <= nb.left { nb.right } else { nb.left };
            log_grid(d, outer, grid)
        } else {
            let half = GridSpec { points: grid.points.div_ceil(2), ..grid };
            let mut pts = log_grid(d, nb.left, half);
            pts.extend(log_grid(d, nb.right, half));
            pts.sort_by(f64::total_cmp);
            pts
        }
    }

    /// Minimum of `v` on the grid (should be ≥ 0) and whether `v` is strictly
    /// monotone away from Δ on each side.
    pub fn check_shape(&self, grid: &[f64]) -> (f64, bool) {
        let mut min_v = f64::INFINITY;
        let mut monotone = true;
        for &x in grid {
            min_v = min_v.min((self.v)(x));
            let slope = (self.v_prime)(x) * (x - self.delta).signum();
            if self.delta.is_finite() && slope <= 0.0 {
                monotone = false;
            }
        }
        (min_v, monotone)
    }
}

/// Evaluation grid: `points` values spread geometrically over `decades`
/// decades of distance to Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub points: usize,
    pub decades: f64,
    /// The outermost point sits at this fraction of the neighborhood radius.
    pub outer_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 2048, decades: 8.0, outer_fraction: 0.999 }
    }
}

/// Points `Δ + (outer - Δ)·f·10^{-decades·k/(n-1)}`, sorted.
pub fn log_grid(delta: f64, outer: f64, grid: GridSpec) -> Vec<f64> {
    let n = grid.points.max(2);
    let span = (outer - delta) * grid.outer_fraction;
    let mut pts: Vec<f64> =
        (0..n).map(|k| delta + span * 10f64.powf(-grid.decades * k as f64 / (n - 1) as f64)).collect();
    pts.sort_by(f64::total_cmp);
    pts
}

fn towards_infinity(nb: Interval, delta: f64, grid: GridSpec) -> Vec<f64> {
    let n = grid.points.max(2);
    let (start, far, s) = if delta > 0.0 { (nb.left, nb.right, 1.0) } else { (nb.right, nb.left, -1.0) };
    // a finite far end caps the spread, otherwise it spans three decades
    let scale = if far.is_finite() { (far - start).abs() * grid.outer_fraction / 999.001 } else { 1.0 };
    let mut pts: Vec<f64> =
        (0..n).map(|k| start + s * scale * (10f64.powf(3.0 * k as f64 / (n - 1) as f64) - 1.0 + 1e-3)).collect();
    pts.sort_by(f64::total_cmp);
    pts
}

/// `b f′ + σ² f″ / 2` at `x`.
pub fn generator_apply(spec: &DiffusionSpec, f_prime: f64, f_second: f64, x: f64) -> f64 {
    let s = spec.sigma(x);
    spec.drift(x) * f_prime + 0.5 * s * s * f_second
}

/// `𝒜v(x)` for a candidate.
pub fn generator_of(spec: &DiffusionSpec, cand: &LyapunovCandidate, x: f64) -> f64 {
    generator_apply(spec, (cand.v_prime)(x), (cand.v_second)(x), x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Repulsive,
    StronglyRepulsive,
    Attractive,
    EulerHypotheses,
    GeneratorTarget,
    Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    pub worst_margin: f64,
    pub worst_point: f64,
    pub grid_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl ConditionReport {
    pub(crate) fn new(
        condition: Condition,
        holds: bool,
        worst_margin: f64,
        worst_point: f64,
        grid_size: usize,
    ) -> Self {
        Self {
            condition,
            holds,
            worst_margin,
            worst_point,
            grid_size,
            epsilon: None,
            c_sigma: None,
            alpha: None,
            threshold: None,
        }
    }
}

/// Terms of `𝒜v - σ²v′²/(2v)` at `x`: (left side, right side).
fn sides(spec: &DiffusionSpec, cand: &LyapunovCandidate, x: f64) -> Result<(f64, f64), LyapunovError> {
    let v = (cand.v)(x);
    if v == 0.0 {
        return Err(LyapunovError::ZeroValue { x });
    }
    let vp = (cand.v_prime)(x);
    let s = spec.sigma(x);
    let lhs = generator_of(spec, cand, x);
    let rhs = 0.5 * s * s * vp * vp / v;
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(LyapunovError::NonFinite { x });
    }
    Ok((lhs, rhs))
}

fn check_points(grid: &[f64], delta: f64) -> Result<(), LyapunovError> {
    if grid.iter().all(|&x| x == delta) {
        return Err(LyapunovError::EmptyGrid);
    }
    Ok(())
}

fn lower_margin(
    condition: Condition,
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    grid: &[f64],
    epsilon: f64,
) -> Result<ConditionReport, LyapunovError> {
    check_points(grid, cand.delta)?;
    let mut worst = (f64::INFINITY, f64::NAN);
    for &x in grid.iter().filter(|&&x| x != cand.delta) {
        let (lhs, rhs) = sides(spec, cand, x)?;
        let margin = lhs - rhs - epsilon * (cand.v)(x);
        if margin < worst.0 {
            worst = (margin, x);
        }
    }
    Ok(ConditionReport::new(condition, worst.0 >= 0.0, worst.0, worst.1, grid.len()))
}

/// `𝒜v ≥ σ² v′² / (2v)` on the grid.
pub fn check_repulsive(
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    grid: &[f64],
) -> Result<ConditionReport, LyapunovError> {
    lower_margin(Condition::Repulsive, cand, spec, grid, 0.0)
}

/// `𝒜v ≥ σ² v′² / (2v) + ε v` on the grid.
pub fn check_strongly_repulsive(
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    grid: &[f64],
    epsilon: f64,
) -> Result<ConditionReport, LyapunovError> {
    if !(epsilon > 0.0) {
        return Err(LyapunovError::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut r = lower_margin(Condition::StronglyRepulsive, cand, spec, grid, epsilon)?;
    r.epsilon = Some(epsilon);
    Ok(r)
}

/// Relative gap below which the two sides count as equal.
pub const STRICTNESS: f64 = 1e-12;

/// `𝒜v < σ² v′² / (2v)` on the grid. Both sides vanish at Δ, so strictness
/// is measured relative to their size: `𝒜v - rhs < -1e-12·(|𝒜v| + |rhs|)`.
/// `worst_margin` is the largest raw `𝒜v - rhs`.
pub fn check_attractive(
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    grid: &[f64],
) -> Result<ConditionReport, LyapunovError> {
    check_points(grid, cand.delta)?;
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    let mut holds = true;
    for &x in grid.iter().filter(|&&x| x != cand.delta) {
        let (lhs, rhs) = sides(spec, cand, x)?;
        let margin = lhs - rhs;
        if margin >= -STRICTNESS * (lhs.abs() + rhs.abs()) {
            holds = false;
        }
        if margin > worst.0 {
            worst = (margin, x);
        }
    }
    Ok(ConditionReport::new(Condition::Attractive, holds, worst.0, worst.1, grid.len()))
}

/// Convexity, `v′b ≥ 0` and `|v′σ| ≤ c_σ v` on a two-sided grid over `u`.
/// `worst_margin` is the smallest of `v″` and `v′b`; the reported `c_σ` is
/// the grid maximum of `|v′σ|/v`, withheld when the ratio grows towards Δ.
pub fn check_euler_hypotheses(
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    u: Interval,
    grid: GridSpec,
) -> Result<ConditionReport, LyapunovError> {
    let delta = cand.delta;
    if !u.contains(delta) {
        return Err(LyapunovError::Argument(format!("{delta} is not inside {u}")));
    }
    let half = GridSpec { points: grid.points.div_ceil(2), ..grid };
    let sides_pts = [log_grid(delta, u.left, half), log_grid(delta, u.right, half)];
    let mut worst = (f64::INFINITY, f64::NAN);
    let mut c_sigma: f64 = 0.0;
    let mut bounded = true;
    for pts in &sides_pts {
        for &x in pts {
            let v = (cand.v)(x);
            if v == 0.0 {
                return Err(LyapunovError::ZeroValue { x });
            }
            let vp = (cand.v_prime)(x);
            let conv = (cand.v_second)(x);
            let push = vp * spec.drift(x);
            let ratio = (vp * spec.sigma(x)).abs() / v;
            if !(conv.is_finite() && push.is_finite() && ratio.is_finite()) {
                return Err(LyapunovError::NonFinite { x });
            }
            let m = conv.min(push);
            if m < worst.0 {
                worst = (m, x);
            }
            c_sigma = c_sigma.max(ratio);
        }
        // growth of |v′σ|/v towards Δ over the two innermost decades
        let ratio_at = |x: f64| ((cand.v_prime)(x) * spec.sigma(x)).abs() / (cand.v)(x);
        let inner = if pts[0] < delta { pts[pts.len() - 1] } else { pts[0] };
        let t_in = (inner - delta).abs();
        let outer = delta + (inner - delta) * 100.0;
        let (r_in, r_out) = (ratio_at(inner), ratio_at(outer));
        if r_in > 0.0 && r_out > 0.0 {
            let slope = (r_in / r_out).ln() / (t_in / (100.0 * t_in)).ln();
            if slope < -0.05 {
                bounded = false;
            }
        }
    }
    let mut r = ConditionReport::new(
        Condition::EulerHypotheses,
        worst.0 >= 0.0 && bounded,
        worst.0,
        worst.1,
        sides_pts[0].len() + sides_pts[1].len(),
    );
    r.c_sigma = bounded.then_some(c_sigma);
    Ok(r)
}

/// Orientation `+1` when Δ lies to the right of `c`.
fn orientation(delta: f64, c: f64) -> Result<f64, LyapunovError> {
    if delta == c || delta.is_nan() || !c.is_finite() {
        return Err(LyapunovError::Argument(format!("Δ = {delta} and c = {c} must differ")));
    }
    Ok(if delta > c { 1.0 } else { -1.0 })
}

fn side_interval(delta: f64, c: f64) -> Interval {
    Interval { left: c.min(delta), right: c.max(delta) }
}

/// `V = ±(p - p(c))` on the side of `c` towards Δ, increasing towards Δ;
/// `𝒜V = 0`.
pub fn canonical_repulsive_v(table: &ScaleSpeedTable, delta: f64, c: f64) -> Result<LyapunovCandidate, LyapunovError> {
    let s = orientation(delta, c)?;
    let pc = table.p(c)?;
    let (t0, t1, t2) = (table.clone(), table.clone(), table.clone());
    Ok(LyapunovCandidate::new(
        "canonical_repulsive",
        move |x| s * (t0.p(x).unwrap_or(f64::NAN) - pc),
        move |x| s * t1.p_prime(x).unwrap_or(f64::NAN),
        move |x| s * t2.p_second(x).unwrap_or(f64::NAN),
        side_interval(delta, c),
        delta,
    ))
}

/// `V(x) = ∫_c^x p′(y) ∫_y^Δ m(z) dz dy`, for which `𝒜V = -1`. Fails when
/// `m` is not integrable at Δ.
pub fn canonical_strong_v(table: &ScaleSpeedTable, delta: f64, c: f64) -> Result<LyapunovCandidate, LyapunovError> {
    orientation(delta, c)?;
    let policy = table.policy().limit;
    let tail = improper_limit(|x| table.m(x).unwrap_or(f64::NAN), delta, c, &policy).map_err(FellerError::from)?;
    let mass = tail.finite_value().ok_or(FellerError::SpeedNotIntegrable { endpoint: delta })?;
    // signed ∫_c^Δ m
    let signed_mass = if delta > c { mass } else { -mass };
    let tol = Tolerance::mixed(table.policy().quad_tol);
    let max_sub = table.policy().max_subdivisions;

    // T(y) = ∫_y^Δ m = ∫_c^Δ m - ∫_c^y m
    let tail_from = {
        let t = table.clone();
        Arc::new(move |y: f64| -> f64 {
            if y == c {
                return signed_mass;
            }
            let (lo, hi, s) = if y > c { (c, y, 1.0) } else { (y, c, -1.0) };
            match integrate_with(&|z| t.m(z).unwrap_or(f64::NAN), lo, hi, tol, max_sub) {
                Ok(r) => signed_mass - s * r.value,
                Err(_) => f64::NAN,
            }
        })
    };
    let vp = {
        let t = table.clone();
        let tail_from = tail_from.clone();
        move |x: f64| t.p_prime(x).unwrap_or(f64::NAN) * tail_from(x)
    };
    let vpp = {
        let t = table.clone();
        let tail_from = tail_from.clone();
        move |x: f64| {
            let (p2, p1, m) = (t.p_second(x), t.p_prime(x), t.m(x));
            match (p2, p1, m) {
                (Ok(p2), Ok(p1), Ok(m)) => p2 * tail_from(x) - p1 * m,
                _ => f64::NAN,
            }
        }
    };
    let v = {
        let vp = vp.clone();
        move |x: f64| {
            if x == c {
                return 0.0;
            }
            let (lo, hi, s) = if x > c { (c, x, 1.0) } else { (x, c, -1.0) };
            match integrate_with(&vp, lo, hi, Tolerance::mixed(1e-10), max_sub) {
                Ok(r) => s * r.value,
                Err(_) => f64::NAN,
            }
        }
    };
    Ok(LyapunovCandidate::new("canonical_strong", v, vp, vpp, side_interval(delta, c), delta))
}

/// Checks `𝒜V = target` on the grid; the margin at a point is the deviation
/// relative to `max(1, |bV′| + |σ²V″/2|)`, and the condition holds when the
/// worst deviation is at most `tol`.
pub fn check_generator_target(
    cand: &LyapunovCandidate,
    spec: &DiffusionSpec,
    grid: &[f64],
    target: f64,
    tol: f64,
) -> Result<ConditionReport, LyapunovError> {
    if grid.is_empty() {
        return Err(LyapunovError::EmptyGrid);
    }
    let mut worst = (0.0f64, f64::NAN);
    for &x in grid {
        let s = spec.sigma(x);
        let a = spec.drift(x) * (cand.v_prime)(x);
        let b = 0.5 * s * s * (cand.v_second)(x);
        let dev = ((a + b) - target).abs() / (a.abs() + b.abs()).max(1.0);
        if !dev.is_finite() {
            return Err(LyapunovError::NonFinite { x });
        }
        if dev > worst.0 || worst.1.is_nan() {
            worst = (dev, x);
        }
    }
    Ok(ConditionReport::new(Condition::GeneratorTarget, worst.0 <= tol, worst.0, worst.1, grid.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feller::{FellerPolicy, Nature};
    use crate::model::{brownian, make_paper_example, ornstein_uhlenbeck, PowerLawProfile};
    use approx::assert_relative_eq;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn generator_matches_closed_forms() {
        for c in [0.5, 1.0, 1.5] {
            let spec = make_paper_example(c).unwrap();
            for x in [-7.0, -3.5, 3.0, 4.0, 9.0] {
                // V = (x - 3 sgn x)², b = -V′: 𝒜V = -4(x - 3 sgn x)² + c²x²
                let v_prime = 2.0 * (x - 3.0 * f64::signum(x));
                let got = generator_apply(&spec, v_prime, 2.0, x);
                let want = -(4.0 - c * c) * x * x + 24.0 * x.abs() - 36.0;
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
            for x in [0.1, 1.0, 2.5] {
                let got = generator_apply(&spec, 2.0 * x, 2.0, x);
                assert_relative_eq!(got, (1.0 + c * c) * x * x - x.powi(4) / 9.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn repulsive_checks() {
        let spec = make_paper_example(1.0).unwrap();
        let cand = LyapunovCandidate::x_exp(0.0, iv(0.0, 1.0));
        let r = check_repulsive(&cand, &spec, &cand.default_grid(GridSpec::default())).unwrap();
        assert!(r.holds, "{r:?}");

        let spec = make_paper_example(1.5).unwrap();
        let cand = LyapunovCandidate::square(0.0, iv(0.0, 1.0));
        let r = check_repulsive(&cand, &spec, &cand.default_grid(GridSpec::default())).unwrap();
        assert!(!r.holds && r.worst_margin < 0.0);
    }

    #[test]
    fn brownian_distance_is_not_repulsive() {
        // 𝒜v = 0 while σ²v′²/(2v) = 1/(2x) > 0: zero is attractive for Brownian motion
        let spec = brownian(1.0).unwrap();
        let cand = LyapunovCandidate::distance(0.0, iv(0.0, 1.0));
        let grid = cand.default_grid(GridSpec::default());
        let r = check_repulsive(&cand, &spec, &grid).unwrap();
        assert!(!r.holds);
        assert!(check_attractive(&cand, &spec, &grid).unwrap().holds);
    }

    #[test]
    fn zero_candidate_value_is_an_error() {
        let spec = brownian(1.0).unwrap();
        let cand = LyapunovCandidate::new(
            "shifted",
            |x: f64| (x - 0.5).powi(2),
            |x| 2.0 * (x - 0.5),
            |_| 2.0,
            iv(0.0, 1.0),
            0.0,
        );
        let err = check_repulsive(&cand, &spec, &[0.25, 0.5]).unwrap_err();
        assert!(matches!(err, LyapunovError::ZeroValue { .. }));
    }

    #[test]
    fn strongly_repulsive_checks() {
        for c in [0.5f64, 0.99] {
            let eps = (1.0 - c * c) / 2.0;
            let spec = make_paper_example(c).unwrap();
            let cand = LyapunovCandidate::square(0.0, iv(0.0, 3.0 * eps.sqrt()));
            let r = check_strongly_repulsive(&cand, &spec, &cand.default_grid(GridSpec::default()), eps).unwrap();
            assert!(r.holds, "c = {c}: {r:?}");
            assert_eq!(r.epsilon, Some(eps));
        }
        let spec = make_paper_example(1.5).unwrap();
        let cand = LyapunovCandidate::square(0.0, iv(0.0, 0.5));
        let grid = cand.default_grid(GridSpec::default());
        for eps in [1e-6, 0.1, 1.0] {
            assert!(!check_strongly_repulsive(&cand, &spec, &grid, eps).unwrap().holds);
        }
        assert!(check_strongly_repulsive(&cand, &spec, &grid, 0.0).is_err());
    }

    #[test]
    fn attractive_checks() {
        let cand = LyapunovCandidate::square(0.0, iv(0.0, 0.1));
        let grid = cand.default_grid(GridSpec::default());
        assert!(check_attractive(&cand, &make_paper_example(1.5).unwrap(), &grid).unwrap().holds);
        assert!(!check_attractive(&cand, &make_paper_example(0.5).unwrap(), &grid).unwrap().holds);
        let cand = LyapunovCandidate::square(0.0, iv(0.0, 1.0));
        let r = check_attractive(&cand, &brownian(1.0).unwrap(), &cand.default_grid(GridSpec::default())).unwrap();
        assert!(r.holds);
        assert_relative_eq!(r.worst_margin, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_hypotheses() {
        let c = 0.75;
        let spec = make_paper_example(c).unwrap();
        let cand = LyapunovCandidate::square(0.0, iv(-0.5, 0.5));
        let r = check_euler_hypotheses(&cand, &spec, iv(-0.5, 0.5), GridSpec::default()).unwrap();
        assert!(r.holds);
        assert_relative_eq!(r.c_sigma.unwrap(), 2.0 * c, max_relative = 1e-12);

        let profile = PowerLawProfile::new(0.0, 1.0, 1.0, 0.5, 0.3).unwrap();
        let r = check_euler_hypotheses(&cand, &profile.local_spec(), iv(-0.5, 0.5), GridSpec::default()).unwrap();
        assert!(r.holds);
        assert_relative_eq!(r.c_sigma.unwrap(), 0.6, max_relative = 1e-12);

        let root =
            DiffusionSpec::new("root", Interval::real_line(), |x| x, |x: f64| x.abs().sqrt(), vec![0.0]).unwrap();
        let r = check_euler_hypotheses(&cand, &root, iv(-0.5, 0.5), GridSpec::default()).unwrap();
        assert!(!r.holds);
        assert_eq!(r.c_sigma, None);
    }

    #[test]
    fn canonical_constructions() {
        let ou = ornstein_uhlenbeck(0.5, 1.0).unwrap();
        let t = ScaleSpeedTable::new(&ou, 0.0, FellerPolicy::default()).unwrap();
        let grid: Vec<f64> = (0..64).map(|i| 0.5 + 2.5 * i as f64 / 63.0).collect();

        let v = canonical_repulsive_v(&t, f64::INFINITY, 0.0).unwrap();
        assert!(check_generator_target(&v, &ou, &grid, 0.0, 1e-6).unwrap().holds);
        let want = integrate_with(&|y: f64| (0.5 * y * y).exp(), 0.0, 1.5, Tolerance::mixed(1e-12), 100).unwrap();
        assert_relative_eq!((v.v)(1.5), want.value, max_relative = 1e-10);

        let v = canonical_strong_v(&t, f64::INFINITY, 0.0).unwrap();
        let r = check_generator_target(&v, &ou, &grid, -1.0, 1e-4).unwrap();
        assert!(r.holds, "{r:?}");
        assert!((v.v)(1.0) > 0.0);

        let bm = brownian(1.0).unwrap();
        let tb = ScaleSpeedTable::new(&bm, 0.0, FellerPolicy::default()).unwrap();
        let v = canonical_repulsive_v(&tb, f64::INFINITY, 0.3).unwrap();
        assert_relative_eq!((v.v)(2.0), 1.7, epsilon = 1e-12);
        assert!(matches!(
            canonical_strong_v(&tb, f64::INFINITY, 0.0),
            Err(LyapunovError::Feller(FellerError::SpeedNotIntegrable { .. }))
        ));
    }

    #[test]
    fn canonical_strong_v_towards_degenerate_point() {
        let spec = make_paper_example(0.5).unwrap();
        let t = ScaleSpeedTable::new(&spec, 1.0, FellerPolicy::default()).unwrap();
        let v = canonical_strong_v(&t, 0.0, 1.0).unwrap();
        let grid = log_grid(0.0, 1.0, GridSpec { points: 256, ..GridSpec::default() });
        let r = check_generator_target(&v, &spec, &grid, -1.0, 1e-4).unwrap();
        assert!(r.holds, "{r:?}");
        let v = canonical_repulsive_v(&t, 0.0, 1.0).unwrap();
        assert!(check_generator_target(&v, &spec, &grid, 0.0, 1e-6).unwrap().holds);
    }

    #[test]
    fn criteria_match_boundary_classification() {
        for (c, cand, expected) in [
            (0.5, LyapunovCandidate::square(0.0, iv(0.0, 3.0 * 0.375f64.sqrt())), Nature::StronglyRepulsive),
            (1.0, LyapunovCandidate::x_exp(0.0, iv(0.0, 1.0)), Nature::Repulsive),
            (1.5, LyapunovCandidate::square(0.0, iv(0.0, 0.5)), Nature::Attractive),
        ] {
            let spec = make_paper_example(c).unwrap();
            let grid = cand.default_grid(GridSpec::default());
            let eps = ((1.0 - c * c).abs() / 2.0).max(0.05);
            let strong = check_strongly_repulsive(&cand, &spec, &grid, eps).unwrap().holds;
            let rep = check_repulsive(&cand, &spec, &grid).unwrap().holds;
            let att = check_attractive(&cand, &spec, &grid).unwrap().holds;
            assert!(!(rep && att));
            let by_criteria = if strong {
                Nature::StronglyRepulsive
            } else if rep {
                Nature::Repulsive
            } else if att {
                Nature::Attractive
            } else {
                Nature::Unknown
            };
            assert_eq!(by_criteria, expected, "c = {c}");
            let table = ScaleSpeedTable::new(&spec, 1.0, FellerPolicy::default()).unwrap();
            assert_eq!(table.classify_boundary(0.0).unwrap().nature, expected);
        }
    }

    #[test]
    fn log_transform_identity() {
        let spec = make_paper_example(0.7).unwrap();
        let cand = LyapunovCandidate::x_exp(0.0, iv(0.0, 1.0));
        let l = 2.0;
        for x in [1e-4, 0.01, 0.3, 0.9] {
            let (v, vp, vpp) = ((cand.v)(x), (cand.v_prime)(x), (cand.v_second)(x));
            // V = -ln v + L, V′ = -v′/v, V″ = -v″/v + v′²/v²
            let _big_v = -v.ln() + l;
            let av = generator_apply(&spec, -vp / v, -vpp / v + vp * vp / (v * v), x);
            let s = spec.sigma(x);
            let want = -generator_of(&spec, &cand, x) / v + 0.5 * s * s * vp * vp / (v * v);
            assert!((av - want).abs() <= 1e-8 * want.abs().max(1.0));
        }
    }
}
