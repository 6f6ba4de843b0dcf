use degendiff::feller::{classify_powerlaw, FellerPolicy, Nature, ScaleSpeedTable};
use degendiff::model::{brownian, estimate_powerlaw, make_paper_example, ornstein_uhlenbeck, PowerLawProfile};
use degendiff::quadrature::{improper_limit, integrate, LimitKind, LimitPolicy};
use proptest::prelude::*;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_is_linear(
        f in prop::collection::vec(-5.0f64..5.0, 1..6),
        g in prop::collection::vec(-5.0f64..5.0, 1..6),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        a in -4.0f64..0.0,
        len in 0.1f64..5.0,
    ) {
        let b = a + len;
        let rf = integrate(|x| poly(&f, x), a, b, 1e-12).unwrap();
        let rg = integrate(|x| poly(&g, x), a, b, 1e-12).unwrap();
        let rh = integrate(|x| alpha * poly(&f, x) + beta * poly(&g, x), a, b, 1e-12).unwrap();
        let combined = alpha * rf.value + beta * rg.value;
        let err = alpha.abs() * rf.error_estimate + beta.abs() * rg.error_estimate + rh.error_estimate;
        let slack = 1e-12 * (1.0 + rh.value.abs() + combined.abs());
        prop_assert!((rh.value - combined).abs() <= err + slack);
    }

    #[test]
    fn integration_is_additive(
        f in prop::collection::vec(-5.0f64..5.0, 1..6),
        a in -4.0f64..0.0,
        l1 in 0.1f64..3.0,
        l2 in 0.1f64..3.0,
        shift in 0.0f64..1.0,
    ) {
        let h = |x: f64| poly(&f, x) + (x + shift).sin();
        let (b, c) = (a + l1, a + l1 + l2);
        let ab = integrate(h, a, b, 1e-12).unwrap();
        let bc = integrate(h, b, c, 1e-12).unwrap();
        let ac = integrate(h, a, c, 1e-12).unwrap();
        let err = ab.error_estimate + bc.error_estimate + ac.error_estimate;
        prop_assert!((ab.value + bc.value - ac.value).abs() <= err + 1e-12 * (1.0 + ac.value.abs()));
    }

    #[test]
    fn hitting_probability_is_scale_invariant(
        a in 0.2f64..2.0,
        w1 in 0.05f64..0.95,
        len in 0.5f64..4.0,
        c2 in 0.5f64..5.0,
    ) {
        let spec = make_paper_example(0.5).unwrap();
        let t1 = ScaleSpeedTable::new(&spec, 1.0, FellerPolicy::default()).unwrap();
        let t2 = ScaleSpeedTable::new(&spec, c2, FellerPolicy::default()).unwrap();
        let b = a + len;
        let x = a + w1 * len;
        let h1 = t1.hitting_probability(x, a, b).unwrap();
        let h2 = t2.hitting_probability(x, a, b).unwrap();
        prop_assert!((h1 - h2).abs() <= 1e-12, "{h1} vs {h2}");
    }

    #[test]
    fn hitting_probability_is_monotone(a in -3.0f64..0.0, len in 0.5f64..6.0) {
        let spec = ornstein_uhlenbeck(0.5, 1.0).unwrap();
        let t = ScaleSpeedTable::new(&spec, 0.0, FellerPolicy::default()).unwrap();
        let b = a + len;
        let mut prev = 0.0;
        for i in 0..=40 {
            let x = if i == 40 { b } else { a + len * i as f64 / 40.0 };
            let h = t.hitting_probability(x, a, b).unwrap();
            prop_assert!(h >= prev - 1e-15);
            prev = h;
        }
        prop_assert!((prev - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exit_time_forms_agree(a in -2.0f64..-0.2, len in 0.4f64..4.0, w in 0.05f64..0.95, ou in any::<bool>()) {
        let spec = if ou { ornstein_uhlenbeck(0.5, 1.0).unwrap() } else { brownian(1.0).unwrap() };
        let t = ScaleSpeedTable::new(&spec, 0.0, FellerPolicy::default()).unwrap();
        let (b, x) = (a + len, a + w * len);
        let e = t.expected_exit_time(x, a, b).unwrap();
        let g = t.green_exit_time(x, a, b).unwrap();
        prop_assert!((e.value - g.value).abs() <= e.error_estimate + g.error_estimate);
    }
}

#[test]
fn power_integrands_near_zero_match_exponent_arithmetic() {
    let policy = LimitPolicy::default();
    for alpha in [-2.0, -1.5, -1.1, -1.0, -0.9, -0.5, 0.0, 1.0] {
        let v = improper_limit(|x: f64| x.powf(alpha), 0.0, 1.0, &policy).unwrap();
        let finite = matches!(v.kind, LimitKind::Finite { .. });
        assert_eq!(finite, alpha > -1.0, "alpha = {alpha}: {:?}", v.kind);
        if finite {
            let exact = 1.0 / (alpha + 1.0);
            assert!((v.finite_value().unwrap() - exact).abs() < 1e-6 * exact, "alpha = {alpha}");
        } else {
            assert!(v.is_infinite(), "alpha = {alpha}: {:?}", v.kind);
        }
    }
}

#[test]
fn scale_function_solves_the_homogeneous_equation() {
    let cases = [
        (ornstein_uhlenbeck(0.5, 1.0).unwrap(), 0.0, -4.0, 4.0),
        (make_paper_example(0.5).unwrap(), 1.0, 0.05, 8.0),
        (make_paper_example(1.5).unwrap(), -1.0, -8.0, -0.05),
    ];
    for (spec, c, lo, hi) in cases {
        let t = ScaleSpeedTable::new(&spec, c, FellerPolicy::default()).unwrap();
        for i in 0..=200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let s = spec.sigma(x);
            let a = spec.drift(x) * t.p_prime(x).unwrap();
            let b = 0.5 * s * s * t.p_second(x).unwrap();
            assert!((a + b).abs() <= 1e-6 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE), "{} at {x}", spec.name);
        }
    }
}

#[test]
fn exponent_rule_agrees_with_numeric_classification() {
    let mut compared = 0;
    for &beta in &[0.5, 1.0, 2.0, 3.0] {
        for &varsigma in &[1.0, 1.25, 1.5, 2.0] {
            for &(c_b, c_sigma) in &[(0.5, 0.5), (0.5, 1.5), (1.0, 0.8), (2.0, 1.0), (0.3, 2.0)] {
                let profile = PowerLawProfile::new(0.0, beta, varsigma, c_b, c_sigma).unwrap();
                let rule = classify_powerlaw(&profile).nature;
                if rule == Nature::Unknown {
                    continue;
                }
                let spec = profile.local_spec();
                let table = ScaleSpeedTable::new(&spec, 0.5, FellerPolicy::default()).unwrap();
                let numeric = table.classify_boundary(0.0).unwrap_or_else(|e| panic!("{profile:?}: {e}")).nature;
                if numeric == Nature::Unknown {
                    continue;
                }
                compared += 1;
                assert_eq!(rule, numeric, "profile {profile:?}");
            }
        }
    }
    assert!(compared >= 20, "only {compared} profiles compared");
}

#[test]
fn powerlaw_parameters_round_trip() {
    for &(beta, varsigma, c_b, c_sigma) in &[(1.0, 1.0, 0.5, 1.5), (3.0, 1.2, 2.0, 0.7), (0.5, 2.0, 1.0, 1.0)] {
        for delta in [0.0, -1.5, 2.0] {
            let p = PowerLawProfile::new(delta, beta, varsigma, c_b, c_sigma).unwrap();
            let est = estimate_powerlaw(&p.local_spec(), delta, 1e-4, 1e-1).unwrap();
            for (got, want) in [(est.beta, beta), (est.varsigma, varsigma), (est.c_b, c_b), (est.c_sigma, c_sigma)] {
                assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want} for {p:?}");
            }
        }
    }
}
