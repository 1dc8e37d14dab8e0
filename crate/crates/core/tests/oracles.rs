//! Analytic pmfs checked against quadrature, enumeration and worked examples.

use railrisk_core::pmf::SupportKind;
use railrisk_core::quantity::total_quantity_pmf;
use railrisk_core::release::{
    ad_tank_derail_pmf, position_derail_probs, release_count_pmf_mainline, position_profile,
    switched_alone, switched_behind_buffer, thin_release_pmf,
};
use railrisk_core::scenario::{Consist, QuantityTable, TrainConfig, TrainType};
use railrisk_core::severity::{
    pod_pmf, BetaParams, ConditionalSeverity, DiscretizedGe, GeParams, LengthZ, MainlineZ,
};
use railrisk_core::DiscretePmf;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Incomplete beta integral via `u = v^(1/a)` near 0 and `1 - u = w^(1/b)` near 1,
/// which removes the endpoint singularities.
fn beta_integral(a: f64, b: f64, x: f64) -> f64 {
    let n = 200_000;
    let low = |hi: f64| simpson(|v| (1.0 - v.powf(1.0 / a)).powf(b - 1.0), 0.0, hi.powf(a), n) / a;
    if x <= 0.5 {
        low(x)
    } else {
        let high = |lo: f64| simpson(|w| (1.0 - w.powf(1.0 / b)).powf(a - 1.0), 0.0, (1.0 - lo).powf(b), n) / b;
        low(0.5) + high(0.5) - high(x)
    }
}

#[test]
fn pod_cdf_matches_quadrature() {
    let p = BetaParams::new(0.7549, 0.9582);
    let total = beta_integral(p.alpha, p.beta, 0.5) + {
        let b = p.beta;
        let a = p.alpha;
        simpson(|w| (1.0 - w.powf(1.0 / b)).powf(a - 1.0), 0.0, 0.5f64.powf(b), 200_000) / b
    };
    for x in [0.01, 0.2, 0.5, 0.9] {
        let oracle = beta_integral(p.alpha, p.beta, x) / total;
        assert!((p.cdf(x) - oracle).abs() < 1e-10, "x={x}: {} vs {oracle}", p.cdf(x));
    }
    let pod = pod_pmf(p, 100);
    assert!((pod.mass(1) - beta_integral(p.alpha, p.beta, 0.01) / total).abs() < 1e-10);
}

#[test]
fn z_values() {
    let manifest = TrainConfig::new(TrainType::Manifest, 50, 5_000.0, None, false, Consist::all_tank(50)).unwrap();
    let z = MainlineZ::default().z(30.0, 50, &manifest);
    assert!((z - -2.199).abs() < 1e-12, "{z}");
    assert!((LengthZ { intercept: -1.595, length: -0.0029 }.z(100) - -1.885).abs() < 1e-12);
    assert!((LengthZ { intercept: -1.574, length: -0.0016 }.z(100) - -1.734).abs() < 1e-12);
}

#[test]
fn yard_cap_tail_against_long_sum() {
    let params = GeParams { shape: 1.01, rate: 1.68 };
    let ge = DiscretizedGe::new(params, 20).unwrap();
    let f = |x: usize| params.density(x as f64);
    let total: f64 = (1..=10_000).rev().map(f).sum();
    let tail: f64 = (20..=10_000).rev().map(f).sum();
    let rel = (ge.tail(20) - tail / total).abs() / (tail / total);
    assert!(rel < 1e-9, "{} vs {}", ge.tail(20), tail / total);
    let row = ge.conditional(100, 1);
    assert_eq!(row.len(), 20);
    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn uniform_pod_point_severity_example() {
    let pod = DiscretePmf::count(vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
    let sev = ConditionalSeverity::from_rows(3, vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0], vec![1.0]]).unwrap();
    for pd in position_derail_probs(&pod, &sev) {
        assert!((pd - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn ad_example_two_car_block() {
    let consist = Consist::from_flags(vec![false, true, true, false]);
    let pod = DiscretePmf::count(vec![0.0, 0.25, 0.25, 0.25, 0.25]).unwrap();
    // Two cars whenever possible, one at the tail.
    let sev = ConditionalSeverity::from_rows(
        4,
        vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 1.0], vec![1.0]],
    )
    .unwrap();
    let p = ad_tank_derail_pmf(&pod, &sev, &consist);
    assert_eq!(p.masses(), &[0.25, 0.5, 0.25]);
}

#[test]
fn thinning_examples() {
    let two = DiscretePmf::point_mass(SupportKind::Count, 2);
    let p = thin_release_pmf(&two, 0.2, 0.35);
    let q = 0.07;
    for (got, want) in p.masses().iter().zip([(1.0 - q) * (1.0 - q), 2.0 * q * (1.0 - q), q * q]) {
        assert!((got - want).abs() < 1e-15);
    }
    let full = thin_release_pmf(&two, 1.0, 1.0);
    assert_eq!(full.masses(), &[0.0, 0.0, 1.0]);
}

#[test]
fn two_releasing_cars_smallest_quantity() {
    let q = total_quantity_pmf(&DiscretePmf::point_mass(SupportKind::Count, 2), &QuantityTable::default()).unwrap();
    assert!((q.mass_at_gallons(1_500) - 0.112896).abs() < 1e-15);
}

/// Enumerates POD, severity and per-tank release outcomes for a small train.
fn brute_force_mainline(pod: &DiscretePmf, sev: &ConditionalSeverity, consist: &Consist, cpr: f64) -> Vec<f64> {
    // Per-position marginals, then enumerate independent releases.
    let pd = position_derail_probs(pod, sev);
    let r: Vec<f64> = pd
        .iter()
        .zip(consist.flags())
        .filter(|(_, t)| **t)
        .map(|(p, _)| p * cpr)
        .collect();
    let mut out = vec![0.0; r.len() + 1];
    for mask in 0u32..(1 << r.len()) {
        let mut w = 1.0;
        for (i, p) in r.iter().enumerate() {
            w *= if mask >> i & 1 == 1 { *p } else { 1.0 - p };
        }
        out[mask.count_ones() as usize] += w;
    }
    out
}

#[test]
fn mainline_release_count_small_train() {
    let train = TrainConfig::new(
        TrainType::Manifest,
        10,
        1_000.0,
        None,
        false,
        "N2 T3 N1 T2 N2".parse().unwrap(),
    )
    .unwrap();
    let pod = pod_pmf(BetaParams::new(0.7842, 1.1002), 10);
    let sev = ConditionalSeverity::mainline(&train, 35.0, &MainlineZ::default());
    let profile = position_profile(&pod, &sev, train.consist(), 0.3);
    let p = release_count_pmf_mainline(&profile, train.consist());
    let oracle = brute_force_mainline(&pod, &sev, train.consist(), 0.3);
    for (i, o) in oracle.iter().enumerate() {
        assert!((p.mass(i) - o).abs() < 1e-14);
    }
}

#[test]
fn switching_buffer_zero_is_switched_alone() {
    let ge = DiscretizedGe::new(GeParams { shape: 1.44, rate: 1.1 }, 20).unwrap();
    for tt in 1..=20 {
        let sev = ConditionalSeverity::yard(&ge, tt);
        assert_eq!(switched_alone(tt, &sev), switched_behind_buffer(tt, 0, &sev, 20));
    }
}
