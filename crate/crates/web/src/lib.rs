//! WebAssembly bindings for the browser demo in `www/`. Every export returns a
//! JSON string; the page parses it and draws on a canvas.

// `!(x > 0.0)` style guards reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Serialize;
use wasm_bindgen::prelude::*;

use degendiff::feller::{analyze, FellerPolicy, ScaleSpeedTable};
use degendiff::measures::{run_density, DensityConfig, ReferenceDensity};
use degendiff::model::make_paper_example;
use degendiff::vdp2d::{simulate_vdp, VdpConfig};

/// Upper bound on steps per call so the tab stays responsive.
pub const MAX_STEPS: u64 = 5_000_000;

fn steps(n: f64) -> Result<u64, String> {
    if !(n >= 1.0) || n > MAX_STEPS as f64 {
        return Err(format!("steps must be in 1..={MAX_STEPS}"));
    }
    Ok(n as u64)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Boundary natures and ergodic verdict of the example family with noise `c·x`.
pub fn classify_json(c: f64) -> Result<String, String> {
    let spec = make_paper_example(c).map_err(|e| e.to_string())?;
    let subs = analyze(&spec, FellerPolicy::default()).map_err(|e| e.to_string())?;
    to_json(&subs)
}

#[derive(Serialize)]
struct DensityView {
    lo: f64,
    hi: f64,
    /// Empirical density per bin.
    bins: Vec<f64>,
    /// Normalized speed density of the occupied side at the bin centres.
    reference: Vec<f64>,
    side_mass: (f64, f64),
    occupied_right: bool,
    l1_distance: Option<f64>,
    crossings: u64,
    last_crossing: Option<u64>,
}

/// Weighted empirical measure of one scheme run against the speed density.
pub fn density_json(c: f64, n: f64, seed: u64) -> Result<String, String> {
    let spec = make_paper_example(c).map_err(|e| e.to_string())?;
    let cfg = DensityConfig { n_steps: steps(n)?, ..DensityConfig::default() };
    let run = run_density(&spec, &cfg, seed, 0).map_err(|e| e.to_string())?;
    let s = run.summary;
    let side = if s.occupied_right { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
    let reference = degendiff::model::Interval::new(side.0, side.1)
        .ok()
        .and_then(|iv| ScaleSpeedTable::on_subinterval(&spec, iv, FellerPolicy::default()).ok())
        .and_then(|t| ReferenceDensity::from_table(t).ok());
    let h = &run.hist;
    let centres: Vec<f64> = (0..h.bins()).map(|i| 0.5 * (h.bin_edges(i).0 + h.bin_edges(i).1)).collect();
    let view = DensityView {
        lo: h.lo,
        hi: h.hi,
        bins: (0..h.bins()).map(|i| h.density(i)).collect(),
        reference: match &reference {
            Some(r) => centres.iter().map(|&x| if (x > side.0) && (x < side.1) { r.density(x) } else { 0.0 }).collect(),
            None => Vec::new(),
        },
        side_mass: s.side_mass,
        occupied_right: s.occupied_right,
        l1_distance: s.l1_distance,
        crossings: s.crossings,
        last_crossing: s.last_crossing,
    };
    to_json(&view)
}

#[derive(Serialize)]
struct VdpView {
    lo: f64,
    hi: f64,
    cells: usize,
    /// Row-major densities, first index along x.
    density: Vec<f64>,
    origin_block_mass: f64,
    max_cell_mass: f64,
    final_state: (f64, f64),
}

/// Occupation histogram of the noisy Van der Pol scheme.
pub fn vdp_json(c: f64, n: f64, seed: u64) -> Result<String, String> {
    let cfg = VdpConfig { c, n_steps: steps(n)?, ..VdpConfig::default() };
    let run = simulate_vdp(&cfg, seed, 0).map_err(|e| e.to_string())?;
    let h = &run.hist;
    let mut density = Vec::with_capacity(h.cells * h.cells);
    for i in 0..h.cells {
        for j in 0..h.cells {
            density.push(h.density(i, j));
        }
    }
    to_json(&VdpView {
        lo: h.lo,
        hi: h.hi,
        cells: h.cells,
        density,
        origin_block_mass: run.summary.origin_block_mass,
        max_cell_mass: run.summary.max_cell_mass,
        final_state: run.summary.final_state,
    })
}

#[wasm_bindgen]
pub fn classify(c: f64) -> Result<String, JsError> {
    classify_json(c).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn density(c: f64, n: f64, seed: u32) -> Result<String, JsError> {
    density_json(c, n, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn vdp(c: f64, n: f64, seed: u32) -> Result<String, JsError> {
    vdp_json(c, n, seed.into()).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn classify_lists_both_half_lines() {
        let v: Value = serde_json::from_str(&classify_json(0.5).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[1]["left"]["nature"], "strongly_repulsive");
    }

    #[test]
    fn density_view_has_matching_lengths() {
        let v: Value = serde_json::from_str(&density_json(0.5, 20_000.0, 1).unwrap()).unwrap();
        let bins = v["bins"].as_array().unwrap().len();
        assert_eq!(bins, 200);
        assert_eq!(v["reference"].as_array().unwrap().len(), bins);
    }

    #[test]
    fn vdp_view_is_square() {
        let v: Value = serde_json::from_str(&vdp_json(0.8, 10_000.0, 2).unwrap()).unwrap();
        let cells = v["cells"].as_u64().unwrap() as usize;
        assert_eq!(v["density"].as_array().unwrap().len(), cells * cells);
    }

    #[test]
    fn step_count_is_bounded() {
        assert!(density_json(0.5, 0.0, 1).is_err());
        assert!(vdp_json(0.5, 1e9, 1).is_err());
        assert!(steps(f64::NAN).is_err());
    }
}
