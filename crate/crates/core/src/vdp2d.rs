//! Decreasing-step Euler scheme for a noisy Van der Pol oscillator whose
//! drift is truncated to keep it sublinear, with a 2D weighted histogram.

use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler::{fnv_mix, replica_rng, DIVERGENCE_GUARD, FNV_OFFSET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VdpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scheme diverged at step {n}: |X| = {norm}")]
    Divergence { n: u64, norm: f64 },
    #[error("histograms have different layouts")]
    LayoutMismatch,
}

/// `(y, (1 − min(x², 4))·y − x)`
#[inline]
pub fn vdp_drift_truncated(x: f64, y: f64) -> (f64, f64) {
    (y, (1.0 - (x * x).min(4.0)) * y - x)
}

/// Diagonal of the noise matrix, `(c·x, c·y)`.
#[inline]
pub fn vdp_sigma(x: f64, y: f64, c: f64) -> (f64, f64) {
    (c * x, c * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub lo: f64,
    pub hi: f64,
    pub cell: f64,
}

impl Default for Grid2D {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, cell: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VdpConfig {
    pub c: f64,
    pub gamma0: f64,
    pub r: f64,
    pub n_steps: u64,
    pub x0: (f64, f64),
    pub hist: Grid2D,
}

impl Default for VdpConfig {
    fn default() -> Self {
        Self { c: 0.5, gamma0: 0.5, r: 1.0 / 3.0, n_steps: 1_000_000, x0: (1.0, 1.0), hist: Grid2D::default() }
    }
}

impl VdpConfig {
    pub fn validate(&self) -> Result<(), VdpError> {
        let bad = |m: &str| Err(VdpError::Config(m.to_string()));
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("c must be finite and nonnegative");
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad("gamma0 must be positive");
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad("r must lie in (0, 1]");
        }
        if !(self.x0.0.is_finite() && self.x0.1.is_finite()) {
            return bad("x0 must be finite");
        }
        let g = self.hist;
        if !(g.lo.is_finite() && g.hi.is_finite() && g.lo < g.hi && g.cell > 0.0) {
            return bad("histogram window must satisfy lo < hi and cell > 0");
        }
        Ok(())
    }

    /// `γ_{n+1} = γ₀ (n+1)^{-r}`
    #[inline]
    pub fn gamma(&self, n: u64) -> f64 {
        self.gamma0 * (n as f64).powf(-self.r)
    }
}

/// Square 2D histogram with left-closed cells (last row and column closed)
/// and tracked out-of-window mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    /// Row-major, index `i * cells + j` for x-cell `i` and y-cell `j`.
    pub weights: Vec<f64>,
    pub total_weight: f64,
    pub out_of_range: f64,
}

impl Histogram2D {
    pub fn new(grid: Grid2D) -> Result<Self, VdpError> {
        let cells = ((grid.hi - grid.lo) / grid.cell).round();
        if !(1.0..1e4).contains(&cells) {
            return Err(VdpError::Config(format!("bad grid {grid:?}")));
        }
        let cells = cells as usize;
        Ok(Self {
            lo: grid.lo,
            hi: grid.hi,
            cells,
            weights: vec![0.0; cells * cells],
            total_weight: 0.0,
            out_of_range: 0.0,
        })
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    #[inline]
    pub fn axis_index(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v <= self.hi) {
            return None;
        }
        Some((((v - self.lo) / self.cell_width()) as usize).min(self.cells - 1))
    }

    pub fn cell_left(&self, i: usize) -> f64 {
        self.lo + self.cell_width() * i as f64
    }

    #[inline]
    pub fn observe(&mut self, x: f64, y: f64, eta: f64) {
        self.total_weight += eta;
        match (self.axis_index(x), self.axis_index(y)) {
            (Some(i), Some(j)) => self.weights[i * self.cells + j] += eta,
            _ => self.out_of_range += eta,
        }
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        self.weights[i * self.cells + j] / self.total_weight
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        let w = self.cell_width();
        self.mass(i, j) / (w * w)
    }

    /// Mass of the cells `i0..=i1 × j0..=j1`.
    pub fn block_mass(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let mut m = 0.0;
        for i in i0..=i1.min(self.cells - 1) {
            for j in j0..=j1.min(self.cells - 1) {
                m += self.mass(i, j);
            }
        }
        m
    }

    pub fn mass_defect(&self) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        let s: f64 = self.weights.iter().sum::<f64>() + self.out_of_range;
        (s - self.total_weight).abs() / self.total_weight
    }

    pub fn merge(&mut self, other: &Self) -> Result<(), VdpError> {
        if self.lo != other.lo || self.hi != other.hi || self.cells != other.cells {
            return Err(VdpError::LayoutMismatch);
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total_weight += other.total_weight;
        self.out_of_range += other.out_of_range;
        Ok(())
    }

    /// Cell holding the origin, if it lies in the window.
    pub fn origin_cell(&self) -> Option<(usize, usize)> {
        let i = self.axis_index(0.0)?;
        Some((i, i))
    }

    /// The 3×3 block centred on the origin cell.
    pub fn origin_block_mass(&self) -> f64 {
        match self.origin_cell() {
            Some((i, _)) => {
                let a = i.saturating_sub(1);
                self.block_mass(a, i + 1, a, i + 1)
            }
            None => 0.0,
        }
    }

    pub fn max_cell_mass(&self) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        self.weights.iter().copied().fold(0.0, f64::max) / self.total_weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdpSummary {
    pub n: u64,
    pub final_state: (f64, f64),
    pub origin_cell_mass: f64,
    pub origin_block_mass: f64,
    pub max_cell_mass: f64,
    /// Steps with `|X_{k-1}| > 3`, as a fraction.
    pub far_fraction: f64,
    pub out_of_range_mass: f64,
    /// Smallest distance from the origin over all step segments.
    pub min_radius: f64,
    /// Steps whose segment passes exactly through the origin.
    pub origin_crossings: u64,
    pub mass_defect: f64,
    pub trajectory_hash: String,
}

#[derive(Debug, Clone)]
pub struct VdpRun {
    pub hist: Histogram2D,
    pub summary: VdpSummary,
}

/// Distance from the origin to the segment `[p, q]`, and whether the segment
/// contains it.
fn segment_to_origin(p: (f64, f64), q: (f64, f64)) -> (f64, bool) {
    let d = (q.0 - p.0, q.1 - p.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let cross = p.0 * q.1 - p.1 * q.0;
    let dot = p.0 * q.0 + p.1 * q.1;
    let through = cross == 0.0 && dot <= 0.0;
    if len2 == 0.0 {
        return (p.0.hypot(p.1), p == (0.0, 0.0));
    }
    let t = (-(p.0 * d.0 + p.1 * d.1) / len2).clamp(0.0, 1.0);
    let dist = (p.0 + t * d.0).hypot(p.1 + t * d.1);
    (dist, through)
}

/// Runs the scheme for `config.n_steps` steps with unit weights, feeding the
/// histogram with pre-step positions.
pub fn simulate_vdp(config: &VdpConfig, seed: u64, replica: u64) -> Result<VdpRun, VdpError> {
    config.validate()?;
    let mut rng = replica_rng(seed, replica);
    let mut hist = Histogram2D::new(config.hist)?;
    let (mut x, mut y) = config.x0;
    let mut hash = fnv_mix(fnv_mix(FNV_OFFSET, x.to_bits()), y.to_bits());
    let mut far = 0u64;
    let mut min_radius = x.hypot(y);
    let mut crossings = 0u64;

    for n in 0..config.n_steps {
        hist.observe(x, y, 1.0);
        if x.hypot(y) > 3.0 {
            far += 1;
        }
        let g = config.gamma(n + 1);
        let sg = g.sqrt();
        let (bx, by) = vdp_drift_truncated(x, y);
        let (sx, sy) = vdp_sigma(x, y, config.c);
        let ux: f64 = rand::Rng::sample(&mut rng, StandardNormal);
        let uy: f64 = rand::Rng::sample(&mut rng, StandardNormal);
        let nx = x + g * bx + sg * sx * ux;
        let ny = y + g * by + sg * sy * uy;
        let norm = nx.hypot(ny);
        if !(norm <= DIVERGENCE_GUARD) {
            return Err(VdpError::Divergence { n: n + 1, norm });
        }
        let (dist, through) = segment_to_origin((x, y), (nx, ny));
        min_radius = min_radius.min(dist);
        crossings += through as u64;
        hash = fnv_mix(fnv_mix(hash, nx.to_bits()), ny.to_bits());
        x = nx;
        y = ny;
    }

    let summary = VdpSummary {
        n: config.n_steps,
        final_state: (x, y),
        origin_cell_mass: hist.origin_cell().map_or(0.0, |(i, j)| hist.mass(i, j)),
        origin_block_mass: hist.origin_block_mass(),
        max_cell_mass: hist.max_cell_mass(),
        far_fraction: if config.n_steps == 0 { 0.0 } else { far as f64 / config.n_steps as f64 },
        out_of_range_mass: if hist.total_weight == 0.0 { 0.0 } else { hist.out_of_range / hist.total_weight },
        min_radius,
        origin_crossings: crossings,
        mass_defect: hist.mass_defect(),
        trajectory_hash: format!("{hash:016x}"),
    };
    Ok(VdpRun { hist, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn drift_and_sigma_values() {
        assert_eq!(vdp_drift_truncated(0.0, 0.0), (0.0, 0.0));
        assert_eq!(vdp_drift_truncated(1.0, 1.0), (1.0, -1.0));
        assert_eq!(vdp_drift_truncated(3.0, 1.0), (1.0, -6.0));
        assert_eq!(vdp_sigma(0.0, 0.0, 0.7), (0.0, 0.0));
        assert_eq!(vdp_sigma(1.0, -2.0, 0.5), (0.5, -1.0));
        let (a, b) = vdp_sigma(2.0, 3.0, 0.8);
        assert_relative_eq!(a, 1.6);
        assert_relative_eq!(b, 2.4, max_relative = 1e-15);
    }

    #[test]
    fn origin_block_location() {
        let h = Histogram2D::new(Grid2D::default()).unwrap();
        assert_eq!(h.cells, 30);
        assert_eq!(h.origin_cell(), Some((15, 15)));
    }

    #[test]
    fn deterministic_flow_stays_finite_and_off_the_origin() {
        let cfg = VdpConfig { c: 0.0, n_steps: 100_000, ..Default::default() };
        let run = simulate_vdp(&cfg, 1, 0).unwrap();
        assert_eq!(run.summary.origin_crossings, 0);
        assert!(run.summary.min_radius > 0.1);
        assert!(run.summary.final_state.0.hypot(run.summary.final_state.1) < 10.0);
        assert!(run.summary.mass_defect < 1e-9);
    }

    #[test]
    fn same_seed_same_hash() {
        let cfg = VdpConfig { c: 0.6, n_steps: 20_000, ..Default::default() };
        let a = simulate_vdp(&cfg, 42, 0).unwrap();
        let b = simulate_vdp(&cfg, 42, 0).unwrap();
        let c = simulate_vdp(&cfg, 42, 1).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.hist, b.hist);
        assert_ne!(a.summary.trajectory_hash, c.summary.trajectory_hash);
    }

    #[test]
    fn segment_geometry() {
        assert_eq!(segment_to_origin((-1.0, 0.0), (1.0, 0.0)), (0.0, true));
        let (d, t) = segment_to_origin((1.0, 1.0), (1.0, -1.0));
        assert_relative_eq!(d, 1.0);
        assert!(!t);
    }

    fn h_from(pts: &[(f64, f64, f64)]) -> Histogram2D {
        let mut h = Histogram2D::new(Grid2D::default()).unwrap();
        for &(x, y, w) in pts {
            h.observe(x, y, w);
        }
        h
    }

    proptest! {
        #[test]
        fn merge_associative_and_mass_conserving(
            a in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, 0.01f64..3.0), 0..40),
            b in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, 0.01f64..3.0), 0..40),
            c in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, 0.01f64..3.0), 0..40),
        ) {
            let (ha, hb, hc) = (h_from(&a), h_from(&b), h_from(&c));
            let mut l = ha.clone();
            let mut bc = hb.clone();
            bc.merge(&hc).unwrap();
            l.merge(&bc).unwrap();
            let mut r = ha.clone();
            r.merge(&hb).unwrap();
            r.merge(&hc).unwrap();
            for (x, y) in l.weights.iter().zip(&r.weights) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300));
            }
            prop_assert!(l.mass_defect() <= 1e-9);
            prop_assert!(r.mass_defect() <= 1e-9);
        }
    }
}
