//! End-to-end acceptance checks. Run with `cargo test --test acceptance`;
//! prints one PASS/FAIL line per criterion and fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use degendiff::euler::{hitting_paths, EulerChain, NoObserver, NoiseKind, NoiseModel, StepSequence};
use degendiff::feller::{analyze, classify_powerlaw, FellerPolicy, Nature, ScaleSpeedTable};
use degendiff::lyapunov::{canonical_repulsive_v, canonical_strong_v, check_generator_target, log_grid, GridSpec};
use degendiff::measures::{run_density, DensityConfig};
use degendiff::model::{brownian, example_one, make_paper_example, ornstein_uhlenbeck, DiffusionSpec, PowerLawProfile};
use degendiff::quadrature::improper_limit;
use degendiff::vdp2d::{simulate_vdp, VdpConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn nature_at(spec: &DiffusionSpec, point: f64) -> Result<Vec<Nature>, String> {
    let subs = analyze(spec, FellerPolicy::default()).map_err(err)?;
    Ok(subs.iter().flat_map(|s| [&s.left, &s.right]).filter(|v| v.endpoint == point).map(|v| v.nature).collect())
}

fn c1_paper_example_classification() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for (c, at_zero) in [(0.5, Nature::StronglyRepulsive), (1.0, Nature::Repulsive), (1.5, Nature::Attractive)] {
        let spec = make_paper_example(c).map_err(err)?;
        let zero = nature_at(&spec, 0.0)?;
        let inf: Vec<Nature> = [f64::NEG_INFINITY, f64::INFINITY]
            .iter()
            .map(|&e| nature_at(&spec, e))
            .collect::<Result<Vec<_>, _>>()?
            .concat();
        ok &= zero.len() == 2 && zero.iter().all(|&n| n == at_zero);
        ok &= inf.len() == 2 && inf.iter().all(|&n| n == Nature::StronglyRepulsive);
        notes.push(format!("c={c}: 0 {zero:?}, ±∞ {inf:?}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 10.0, format!("{}; {secs:.2} s", notes.join("; ")))
}

fn c2_example_one() -> Outcome {
    let spec = example_one(1.2).map_err(err)?;
    let zero = nature_at(&spec, 0.0)?;
    let table = ScaleSpeedTable::new(&spec, 1.0, FellerPolicy::default()).map_err(err)?;
    let mass = improper_limit(|x| table.m(x).unwrap_or(f64::NAN), 0.0, 1.0, &table.policy().limit)
        .map_err(err)?
        .finite_value()
        .ok_or("speed integral not finite")?;
    let want = 50.0 / 7.0;
    let rel = (mass - want).abs() / want;
    check(
        !zero.is_empty() && zero.iter().all(|&n| n == Nature::Attractive) && rel <= 1e-6,
        format!("0 {zero:?}, ∫m = {mass:.12} (rel err {rel:.1e})"),
    )
}

/// Exact-arithmetic reading of the power-law rules.
fn powerlaw_oracle(beta: Ratio<i64>, varsigma: Ratio<i64>, c_b: Ratio<i64>, c_sigma: Ratio<i64>) -> Nature {
    let one = Ratio::from_integer(1);
    let two = Ratio::from_integer(2);
    let gap = one + beta - two * varsigma;
    let excess = c_sigma * c_sigma - two * c_b;
    let zero = Ratio::from_integer(0);
    if gap > zero || (gap == zero && excess > zero) {
        Nature::Attractive
    } else if (gap == zero && excess < zero && beta == one)
        || (gap < zero && excess <= zero && beta > zero && beta <= one)
    {
        Nature::StronglyRepulsive
    } else {
        Nature::Unknown
    }
}

fn c3_powerlaw_oracle() -> Outcome {
    let r = |n: i64, d: i64| Ratio::new(n, d);
    let betas = [r(1, 2), r(1, 1), r(3, 2), r(2, 1), r(3, 1)];
    let varsigmas = [r(1, 1), r(5, 4), r(3, 2), r(2, 1), r(7, 3)];
    // (c_b, c_σ): ties c_σ² = 2c_b and both strict orders
    let consts = [
        (r(1, 2), r(1, 1)),
        (r(9, 8), r(3, 2)),
        (r(1, 18), r(1, 3)),
        (r(2, 1), r(2, 1)),
        (r(1, 2), r(1, 2)),
        (r(1, 2), r(3, 2)),
        (r(1, 1), r(1, 3)),
        (r(1, 4), r(1, 1)),
    ];
    let f = |q: Ratio<i64>| *q.numer() as f64 / *q.denom() as f64;
    let (mut total, mut agree) = (0, 0);
    let mut cases = std::collections::BTreeMap::new();
    let mut mismatch = None;
    for &b in &betas {
        for &s in &varsigmas {
            for &(cb, cs) in &consts {
                let want = powerlaw_oracle(b, s, cb, cs);
                let profile = PowerLawProfile::new(0.0, f(b), f(s), f(cb), f(cs)).map_err(err)?;
                let got = classify_powerlaw(&profile).nature;
                total += 1;
                *cases.entry(format!("{want:?}")).or_insert(0) += 1;
                if got == want {
                    agree += 1;
                } else if mismatch.is_none() {
                    mismatch = Some(format!("β={b} ς={s} c_b={cb} c_σ={cs}: {got:?} vs {want:?}"));
                }
            }
        }
    }
    check(
        total == 200 && agree == total && cases.len() == 3,
        format!(
            "{agree}/{total} agree, cases {cases:?}{}",
            mismatch.map(|m| format!(", first mismatch {m}")).unwrap_or_default()
        ),
    )
}

fn c4_hitting_probability() -> Outcome {
    let spec = brownian(1.0).map_err(err)?;
    let table = ScaleSpeedTable::new(&spec, 0.0, FellerPolicy::default()).map_err(err)?;
    let p = table.hitting_probability(0.0, -1.0, 2.0).map_err(err)?;
    let exact_err = (p - 1.0 / 3.0).abs();
    const PATHS: u64 = 10_000;
    const CHUNK: u64 = 250;
    let parts: Vec<_> = (0..PATHS / CHUNK)
        .into_par_iter()
        .map(|k| hitting_paths(&spec, 0.0, -1.0, 2.0, 1e-4, 7, k * CHUNK, CHUNK, 100_000_000))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let counts = parts.into_iter().reduce(|x, y| x + y).ok_or("no paths")?;
    let (mc, se) = counts.estimate();
    check(
        exact_err <= 1e-10 && (mc - p).abs() <= 0.03 && counts.upper + counts.lower == PATHS,
        format!("quadrature {p:.15} (err {exact_err:.1e}), Monte Carlo {mc:.4} ± {se:.4}"),
    )
}

fn c5_exit_times() -> Outcome {
    let bm = brownian(1.0).map_err(err)?;
    let ou = ornstein_uhlenbeck(0.5, 1.0).map_err(err)?;
    let tb = ScaleSpeedTable::new(&bm, 0.0, FellerPolicy::default()).map_err(err)?;
    let to = ScaleSpeedTable::new(&ou, 0.0, FellerPolicy::default()).map_err(err)?;
    let t = tb.expected_exit_time(0.0, -1.0, 1.0).map_err(err)?;
    let base_err = (t.value - 1.0).abs();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for k in 0..50 {
        let table = if k % 2 == 0 { &tb } else { &to };
        let a = rng.random_range(-4.0..0.0);
        let b = a + rng.random_range(0.05..6.0);
        let x = a + (b - a) * rng.random_range(0.01..0.99);
        let e = table.expected_exit_time(x, a, b).map_err(err)?;
        let g = table.green_exit_time(x, a, b).map_err(err)?;
        let gap = (e.value - g.value).abs();
        let allowed = e.error_estimate + g.error_estimate;
        worst = worst.max(gap / allowed.max(f64::MIN_POSITIVE));
        if gap > allowed {
            fails += 1;
        }
    }
    check(
        base_err <= 1e-8 && fails == 0,
        format!("E[τ] = {:.12} (err {base_err:.1e}); 50 triples, {fails} outside, worst gap/bound {worst:.3}", t.value),
    )
}

fn c6_crossing_finiteness() -> Outcome {
    let start = Instant::now();
    let spec = make_paper_example(0.75).map_err(err)?;
    let last: Vec<Option<u64>> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut chain = EulerChain::new(
                spec.clone(),
                StepSequence::Polynomial { gamma0: 1.0, r: 1.0 / 3.0 },
                NoiseModel::new(NoiseKind::StandardGaussian),
                1.0,
                seed,
                0,
            )
            .map_err(err)?;
            let s = chain.simulate(1_000_000, &mut NoObserver, None).map_err(err)?;
            Ok(s.last_crossing)
        })
        .collect::<Result<_, String>>()?;
    let clean = last.iter().filter(|l| l.is_none_or(|n| n <= 100_000)).count();
    let secs = start.elapsed().as_secs_f64();
    check(clean >= 18 && secs <= 300.0, format!("{clean}/20 runs without a crossing after step 1e5; {secs:.1} s"))
}

fn c7_invariant_density() -> Outcome {
    let spec = make_paper_example(0.5).map_err(err)?;
    let cfg = DensityConfig { n_steps: 1_000_000, ..DensityConfig::default() };
    let run = run_density(&spec, &cfg, 0, 0).map_err(err)?;
    let s = &run.summary;
    let side = s.side_mass.0.max(s.side_mass.1);
    let l1 = s.l1_distance.ok_or_else(|| s.l1_unavailable.clone().unwrap_or_default())?;
    check(
        side >= 0.99 && l1 <= 0.15,
        format!(
            "side mass {:?}, occupied {}, L1 {l1:.4}",
            s.side_mass,
            if s.occupied_right { "right" } else { "left" }
        ),
    )
}

fn c8_dirac_collapse() -> Outcome {
    let spec = make_paper_example(1.0).map_err(err)?;
    let cfg = DensityConfig { n_steps: 1_000_000, ..DensityConfig::default() };
    let run = run_density(&spec, &cfg, 0, 0).map_err(err)?;
    let mass = run.hist.mass_in(-0.25, 0.25);
    check(mass >= 0.8, format!("ν^η([−0.25, 0.25]) = {mass:.4}"))
}

fn c9_generator_identity() -> Outcome {
    let ou = ornstein_uhlenbeck(0.5, 1.0).map_err(err)?;
    let t = ScaleSpeedTable::new(&ou, 0.0, FellerPolicy::default()).map_err(err)?;
    let h = 1e-4;
    let ratio = |x: f64| -> Result<f64, String> { Ok(x.cos() / t.p_prime(x).map_err(err)?) };
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        let x = -2.0 + 4.0 * i as f64 / 400.0;
        let s = ou.sigma(x);
        let direct = ou.drift(x) * x.cos() - 0.5 * s * s * x.sin();
        let outer = (ratio(x + h)? - ratio(x - h)?) / (2.0 * h);
        let via_pm = outer / t.m(x).map_err(err)?;
        worst = worst.max((direct - via_pm).abs());
    }
    check(worst <= 1e-4, format!("max deviation {worst:.2e} over 401 points"))
}

fn c10_canonical_lyapunov() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut run = |label: &str, spec: &DiffusionSpec, at: f64, c: f64, grid: Vec<f64>| -> Result<(), String> {
        let t = ScaleSpeedTable::new(spec, c, FellerPolicy::default()).map_err(err)?;
        let rep = canonical_repulsive_v(&t, at, c).map_err(err)?;
        let r0 = check_generator_target(&rep, spec, &grid, 0.0, 1e-6).map_err(err)?;
        let strong = canonical_strong_v(&t, at, c).map_err(err)?;
        let r1 = check_generator_target(&strong, spec, &grid, -1.0, 1e-4).map_err(err)?;
        ok &= r0.holds && r1.holds;
        notes.push(format!("{label}: {:.1e}/{:.1e}", r0.worst_margin, r1.worst_margin));
        Ok(())
    };
    let ou = ornstein_uhlenbeck(0.5, 1.0).map_err(err)?;
    let lin = |a: f64, b: f64| (0..256).map(move |i| a + (b - a) * i as f64 / 255.0).collect::<Vec<_>>();
    run("OU +∞", &ou, f64::INFINITY, 0.0, lin(0.1, 6.0))?;
    run("OU −∞", &ou, f64::NEG_INFINITY, 0.0, lin(-6.0, -0.1))?;
    let pe = make_paper_example(0.5).map_err(err)?;
    let near = log_grid(0.0, 1.0, GridSpec { points: 256, ..GridSpec::default() });
    run("example 0⁺", &pe, 0.0, 1.0, near)?;
    run("example +∞", &pe, f64::INFINITY, 1.0, lin(1.05, 30.0))?;
    check(ok, format!("worst margins (𝒜(p−p(c)) / 𝒜V+1) {}", notes.join(", ")))
}

fn c11_van_der_pol() -> Outcome {
    let start = Instant::now();
    let runs: Vec<_> = [0.5, 0.8]
        .par_iter()
        .map(|&c| {
            let cfg = VdpConfig { c, n_steps: 1_000_000, ..VdpConfig::default() };
            simulate_vdp(&cfg, 0, 0).map_err(err)
        })
        .collect::<Result<_, _>>()?;
    let (lo, hi) = (&runs[0], &runs[1]);
    let finite = runs.iter().all(|r| {
        r.hist.weights.iter().all(|w| w.is_finite())
            && r.summary.final_state.0.is_finite()
            && r.summary.final_state.1.is_finite()
    });
    let defect = lo.summary.mass_defect.max(hi.summary.mass_defect);
    let secs = start.elapsed().as_secs_f64();
    check(
        hi.summary.origin_block_mass > lo.summary.origin_block_mass && finite && defect <= 1e-9 && secs <= 300.0,
        format!(
            "origin block c=0.5 {:.5}, c=0.8 {:.5}; mass defect {defect:.1e}; {secs:.1} s",
            lo.summary.origin_block_mass, hi.summary.origin_block_mass
        ),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_degendiff")).args(args).env_remove("DEGENDIFF_SEED").output().map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn replay_identical(dir: &Path, name: &str, first: &[&str]) -> Result<bool, String> {
    let a = dir.join(format!("{name}-a"));
    let b = dir.join(format!("{name}-b"));
    let a_s = a.to_str().ok_or("path")?;
    let b_s = b.to_str().ok_or("path")?;
    let mut args = first.to_vec();
    args.extend(["--out", a_s]);
    cli(&args)?;
    let manifest = a.join("manifest.json");
    cli(&[name, "--config", manifest.to_str().ok_or("path")?, "--out", b_s, "--threads", "3"])?;
    let csv = format!("{name}.csv");
    let x = std::fs::read(a.join(&csv)).map_err(err)?;
    let y = std::fs::read(b.join(&csv)).map_err(err)?;
    Ok(!x.is_empty() && x == y)
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let runs = [
        ("density", vec!["density", "--n-steps", "100000", "--replicas", "3", "--seed", "11"]),
        ("simulate", vec!["simulate", "--n-steps", "20000", "--thin", "100", "--replicas", "2", "--seed", "5"]),
        ("vdp2d", vec!["vdp2d", "--n-steps", "50000", "--replicas", "2", "--seed", "3"]),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, args) in &runs {
        let same = replay_identical(dir.path(), name, args)?;
        ok &= same;
        notes.push(format!("{name} {}", if same { "identical" } else { "differs" }));
    }
    check(ok, notes.join(", "))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("boundary classification of the example family", c1_paper_example_classification),
        ("attractive origin with finite speed mass", c2_example_one),
        ("power-law rules vs exact oracle", c3_powerlaw_oracle),
        ("hitting probability, quadrature and Monte Carlo", c4_hitting_probability),
        ("exit time, two formulas", c5_exit_times),
        ("finitely many early crossings", c6_crossing_finiteness),
        ("invariant density on the occupied side", c7_invariant_density),
        ("Dirac collapse at the degenerate point", c8_dirac_collapse),
        ("generator identity in scale/speed form", c9_generator_identity),
        ("canonical Lyapunov constructions", c10_canonical_lyapunov),
        ("Van der Pol origin concentration", c11_van_der_pol),
        ("byte-identical CSV on manifest replay", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
