use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use degendiff::euler::{hitting_paths, EulerChain, HittingCounts, NoObserver, PathPoint};
use degendiff::feller::{analyze, classify_powerlaw, ergodic_verdict, ErgodicVerdict, Nature, ScaleSpeedTable};
use degendiff::lyapunov::{
    canonical_repulsive_v, canonical_strong_v, check_attractive, check_euler_hypotheses, check_generator_target,
    check_repulsive, check_strongly_repulsive, LyapunovCandidate, LyapunovError,
};
use degendiff::measures::{run_density, side_mass, stability_check, WeightedHistogram};
use degendiff::model::{DiffusionSpec, Interval};
use degendiff::vdp2d::{simulate_vdp, Histogram2D};

use crate::config::*;

pub const SCHEMA_VERSION: u32 = 1;

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

pub fn numeric(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 3, error: e.into() }
}

pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
    /// Some verdict is Unknown, Undetermined or Inconclusive.
    pub inconclusive: bool,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(numeric)
}

fn build(model: &degendiff::descriptor::SpecFile) -> Result<DiffusionSpec, Failure> {
    model.build().map_err(usage)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(numeric)?;
    for r in rows {
        w.write_record(&r).map_err(numeric)?;
    }
    let bytes = w.into_inner().map_err(|e| numeric(anyhow!("{e}")))?;
    String::from_utf8(bytes).map_err(numeric)
}

fn replicas_in_order<T: Send, F>(pool: &rayon::ThreadPool, n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
{
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

pub fn classify(cfg: &ClassifyConfig) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    let mut subs = analyze(&spec, cfg.policy).map_err(numeric)?;
    if let Some(x0) = cfg.x0 {
        let iv =
            spec.subinterval_containing(x0).ok_or_else(|| usage(anyhow!("x0 = {x0} is not inside a subinterval")))?;
        let table = ScaleSpeedTable::new(&spec, x0, cfg.policy).map_err(numeric)?;
        if let Some(s) = subs.iter_mut().find(|s| s.interval == iv) {
            s.ergodic = ergodic_verdict(&s.left, &s.right, &table, x0).map_err(numeric)?;
        }
    }
    let powerlaw = spec.profile.as_ref().map(classify_powerlaw);
    let inconclusive = subs.iter().any(|s| {
        s.left.nature == Nature::Unknown
            || s.right.nature == Nature::Unknown
            || s.ergodic == ErgodicVerdict::Undetermined
    });
    Ok(Output {
        json: json!({
            "model": spec.name,
            "subintervals": to_value(&subs)?,
            "powerlaw": to_value(&powerlaw)?,
            "inconclusive": inconclusive,
        }),
        csv: None,
        inconclusive,
    })
}

fn lyap_err(e: LyapunovError) -> Failure {
    match e {
        LyapunovError::Argument(_) => usage(e),
        other => numeric(other),
    }
}

fn neighborhood(p: degendiff::descriptor::IntervalPair) -> Result<Interval, Failure> {
    Interval::new(p.0, p.1).map_err(usage)
}

fn restrict(
    mut cand: LyapunovCandidate,
    window: Option<degendiff::descriptor::IntervalPair>,
) -> Result<LyapunovCandidate, Failure> {
    if let Some(w) = window {
        let w = neighborhood(w)?;
        let nb = cand.neighborhood;
        cand.neighborhood = Interval::new(nb.left.max(w.left), nb.right.min(w.right)).map_err(usage)?;
    }
    Ok(cand)
}

pub fn lyapunov(cfg: &LyapunovConfig) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    if let CheckConfig::Stability { alpha, threshold } = cfg.check {
        let r = stability_check(&spec, alpha, threshold, cfg.grid.points).map_err(usage)?;
        return Ok(Output {
            json: json!({ "model": spec.name, "report": to_value(&r)? }),
            csv: None,
            inconclusive: false,
        });
    }
    let cand = match &cfg.candidate {
        CandidateConfig::Square { at, neighborhood: n } => LyapunovCandidate::square(*at, neighborhood(*n)?),
        CandidateConfig::XExp { at, neighborhood: n } => LyapunovCandidate::x_exp(*at, neighborhood(*n)?),
        CandidateConfig::Distance { at, neighborhood: n } => LyapunovCandidate::distance(*at, neighborhood(*n)?),
        CandidateConfig::CanonicalRepulsive { at, c, window } => {
            let t = ScaleSpeedTable::new(&spec, *c, Default::default()).map_err(usage)?;
            restrict(canonical_repulsive_v(&t, *at, *c).map_err(lyap_err)?, *window)?
        }
        CandidateConfig::CanonicalStrong { at, c, window } => {
            let t = ScaleSpeedTable::new(&spec, *c, Default::default()).map_err(usage)?;
            restrict(canonical_strong_v(&t, *at, *c).map_err(lyap_err)?, *window)?
        }
    };
    let grid = cand.default_grid(cfg.grid);
    let report = match cfg.check {
        CheckConfig::Repulsive => check_repulsive(&cand, &spec, &grid),
        CheckConfig::StronglyRepulsive { epsilon } => check_strongly_repulsive(&cand, &spec, &grid, epsilon),
        CheckConfig::Attractive => check_attractive(&cand, &spec, &grid),
        CheckConfig::EulerHypotheses { u } => check_euler_hypotheses(&cand, &spec, neighborhood(u)?, cfg.grid),
        CheckConfig::GeneratorTarget { target, tol } => check_generator_target(&cand, &spec, &grid, target, tol),
        CheckConfig::Stability { .. } => unreachable!("handled above"),
    }
    .map_err(lyap_err)?;
    Ok(Output {
        json: json!({ "model": spec.name, "candidate": cand.name, "report": to_value(&report)? }),
        csv: None,
        inconclusive: false,
    })
}

pub fn simulate(cfg: &SimulateConfig, seed: u64, pool: &rayon::ThreadPool) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    cfg.steps.validate().map_err(usage)?;
    if cfg.replicas == 0 {
        return Err(usage(anyhow!("replicas must be at least 1")));
    }
    let runs = replicas_in_order(pool, cfg.replicas, |r| {
        let mut chain = EulerChain::new(spec.clone(), cfg.steps, cfg.noise, cfg.x0, seed, r).map_err(usage)?;
        chain.simulate(cfg.n_steps, &mut NoObserver, cfg.thin).map_err(numeric)
    });
    let mut summaries = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        let mut s = run?;
        if let Some(path) = s.path.take() {
            rows.extend(
                path.into_iter().map(|PathPoint { n, time, x }| {
                    vec![r.to_string(), n.to_string(), time.to_string(), x.to_string()]
                }),
            );
        }
        summaries.push(s);
    }
    let csv = match cfg.thin {
        Some(_) => Some(csv_string(&["replica", "n", "time", "x"], rows)?),
        None => None,
    };
    Ok(Output { json: json!({ "model": spec.name, "replicas": to_value(&summaries)? }), csv, inconclusive: false })
}

fn histogram_rows(h: &WeightedHistogram) -> Vec<Vec<String>> {
    (0..h.bins())
        .map(|i| {
            let (l, r) = h.bin_edges(i);
            vec![l.to_string(), r.to_string(), h.density(i).to_string()]
        })
        .collect()
}

pub fn density(cfg: &DensityRunConfig, seed: u64, pool: &rayon::ThreadPool) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    cfg.density.steps.validate().map_err(usage)?;
    if cfg.replicas == 0 {
        return Err(usage(anyhow!("replicas must be at least 1")));
    }
    let runs = replicas_in_order(pool, cfg.replicas, |r| run_density(&spec, &cfg.density, seed, r));
    let mut merged: Option<WeightedHistogram> = None;
    let mut summaries = Vec::new();
    let mut inconclusive = false;
    for run in runs {
        let run = run.map_err(numeric)?;
        inconclusive |= run.summary.l1_distance.is_none();
        match merged.as_mut() {
            Some(m) => m.merge(&run.hist).map_err(numeric)?,
            None => merged = Some(run.hist.clone()),
        }
        summaries.push(run.summary);
    }
    let merged = merged.expect("at least one replica");
    let centre = spec.degenerate_points.first().copied().unwrap_or(0.0);
    let csv = csv_string(&["bin_left", "bin_right", "density"], histogram_rows(&merged))?;
    Ok(Output {
        json: json!({
            "model": spec.name,
            "replicas": to_value(&summaries)?,
            "merged": {
                "side_mass": side_mass(&merged, centre),
                "out_of_range_mass": merged.out_of_range() / merged.total_weight,
                "mass_defect": merged.mass_defect(),
            },
        }),
        csv: Some(csv),
        inconclusive,
    })
}

fn table_for(
    spec: &DiffusionSpec,
    a: f64,
    b: f64,
    policy: degendiff::feller::FellerPolicy,
) -> Result<ScaleSpeedTable, Failure> {
    if !(a < b) {
        return Err(usage(anyhow!("need a < b, got a = {a}, b = {b}")));
    }
    ScaleSpeedTable::new(spec, 0.5 * (a + b), policy).map_err(usage)
}

pub fn hitprob(cfg: &HitprobConfig, seed: u64, pool: &rayon::ThreadPool) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    let table = table_for(&spec, cfg.a, cfg.b, cfg.policy)?;
    let p = table.hitting_probability(cfg.x, cfg.a, cfg.b).map_err(usage)?;
    let mut out = json!({ "model": spec.name, "a": cfg.a, "x": cfg.x, "b": cfg.b, "probability": p });
    if let Some(mc) = cfg.monte_carlo {
        const CHUNK: u64 = 256;
        let chunks = mc.paths.div_ceil(CHUNK);
        let parts = replicas_in_order(pool, chunks, |k| {
            let first = k * CHUNK;
            let count = CHUNK.min(mc.paths - first);
            hitting_paths(&spec, cfg.x, cfg.a, cfg.b, mc.gamma, seed, first, count, mc.max_steps)
        });
        let mut counts = HittingCounts::default();
        for part in parts {
            counts = counts + part.map_err(usage)?;
        }
        let (est, se) = counts.estimate();
        out["monte_carlo"] = json!({ "probability": est, "std_error": se, "counts": to_value(&counts)? });
    }
    Ok(Output { json: out, csv: None, inconclusive: false })
}

pub fn exit_time(cfg: &ExitTimeConfig) -> Result<Output, Failure> {
    let spec = build(&cfg.model)?;
    let table = table_for(&spec, cfg.a, cfg.b, cfg.policy)?;
    let e = table.expected_exit_time(cfg.x, cfg.a, cfg.b).map_err(numeric)?;
    let g = table.green_exit_time(cfg.x, cfg.a, cfg.b).map_err(numeric)?;
    Ok(Output {
        json: json!({
            "model": spec.name, "a": cfg.a, "x": cfg.x, "b": cfg.b,
            "expected_exit_time": to_value(&e)?,
            "green_exit_time": to_value(&g)?,
            "agree": (e.value - g.value).abs() <= e.error_estimate + g.error_estimate,
        }),
        csv: None,
        inconclusive: false,
    })
}

fn grid_rows(h: &Histogram2D) -> Vec<Vec<String>> {
    let w = h.cell_width();
    let mut rows = Vec::with_capacity(h.cells * h.cells);
    for i in 0..h.cells {
        for j in 0..h.cells {
            let x = h.cell_left(i) + 0.5 * w;
            let y = h.cell_left(j) + 0.5 * w;
            rows.push(vec![x.to_string(), y.to_string(), h.density(i, j).to_string()]);
        }
    }
    rows
}

pub fn vdp2d(cfg: &VdpRunConfig, seed: u64, pool: &rayon::ThreadPool) -> Result<Output, Failure> {
    cfg.vdp.validate().map_err(usage)?;
    if cfg.replicas == 0 {
        return Err(usage(anyhow!("replicas must be at least 1")));
    }
    let runs = replicas_in_order(pool, cfg.replicas, |r| simulate_vdp(&cfg.vdp, seed, r));
    let mut merged: Option<Histogram2D> = None;
    let mut summaries = Vec::new();
    for run in runs {
        let run = run.map_err(numeric)?;
        match merged.as_mut() {
            Some(m) => m.merge(&run.hist).map_err(numeric)?,
            None => merged = Some(run.hist.clone()),
        }
        summaries.push(run.summary);
    }
    let merged = merged.expect("at least one replica");
    let csv = csv_string(&["x_cell", "y_cell", "density"], grid_rows(&merged))?;
    Ok(Output {
        json: json!({
            "replicas": to_value(&summaries)?,
            "merged": {
                "origin_block_mass": merged.origin_block_mass(),
                "max_cell_mass": merged.max_cell_mass(),
                "out_of_range_mass": merged.out_of_range / merged.total_weight,
                "mass_defect": merged.mass_defect(),
            },
        }),
        csv: Some(csv),
        inconclusive: false,
    })
}
