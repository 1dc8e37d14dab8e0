//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use railrisk_core::derailment::{ad_derailment_prob, mainline_derailment_prob, switching_derailment_prob};
use railrisk_core::mc::{self, SimConfig};
use railrisk_core::pipeline::{ad_models, mainline_models, yard_ge};
use railrisk_core::quantity::total_quantity_pmf;
use railrisk_core::release::{
    ad_tank_derail_pmf, poisson_binomial, position_derail_probs, release_count_pmf_mainline,
    switched_alone, switched_behind_buffer, thin_release_pmf, PositionProfile,
};
use railrisk_core::scenario::{
    scenario_from_toml, scenario_to_toml, CauseContext, CauseRow, CauseTable, Consist, MetricClass,
    QuantityTable, RateTable, RouteSegment, SwitchingApproach, TrainConfig, TrainType, YardPlan,
    YardType,
};
use railrisk_core::severity::{
    linehaul_severity_pmf, pod_pmf, truncated_geometric, yard_switch_severity_pmf, BetaParams,
    ConditionalSeverity, DiscretizedGe, YardSeverityParams,
};
use railrisk_core::{DiscretePmf, Study};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let e = start.elapsed();
    ensure(e < limit, || format!("took {e:?}, limit {limit:?}"))?;
    Ok(e)
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn random_pod(rng: &mut ChaCha8Rng, l: usize) -> DiscretePmf {
    let mut m = vec![0.0];
    m.extend(random_pmf(rng, l));
    DiscretePmf::count(m).unwrap()
}

fn random_severity(rng: &mut ChaCha8Rng, l: usize) -> ConditionalSeverity {
    ConditionalSeverity::from_rows(l, (1..=l).map(|k| random_pmf(rng, l - k + 1)).collect()).unwrap()
}

fn random_consist(rng: &mut ChaCha8Rng, l: usize) -> Consist {
    Consist::from_flags((0..l).map(|_| rng.gen_bool(0.5)).collect())
}

fn c1_worked_quantity() -> Check {
    let start = Instant::now();
    let mut m = vec![0.05; 21];
    m[0] = 0.0;
    let count = DiscretePmf::count(m).unwrap();
    let q = total_quantity_pmf(&count, &QuantityTable::default()).map_err(|e| e.to_string())?;
    let p = q.mass_at_gallons(4_500);
    let e = within_time(start, Duration::from_secs(1))?;
    ensure((p - 0.003264).abs() <= 5e-5, || format!("P(4500) = {p}"))?;
    Ok(format!("P(4500 gal) = {p:.6} in {e:?}"))
}

fn c2_table_sum() -> Check {
    let t = QuantityTable::default();
    let s = t.probability_sum();
    ensure(s == 1.0, || format!("sum = {s:?}"))?;
    ensure(t.rows().len() == 5, || "expected five rows".into())?;
    Ok(format!("sum = {s:?}"))
}

fn c3_poisson_binomial() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut worst_moment = 0.0f64;
    for case in 0..200 {
        let l = rng.gen_range(1..=20);
        let consist = random_consist(&mut rng, l);
        let release_prob: Vec<f64> = consist
            .flags()
            .iter()
            .map(|t| {
                if !*t {
                    0.0
                } else if case % 10 == 0 {
                    [0.0, 1.0, rng.gen()][rng.gen_range(0..3)]
                } else {
                    rng.gen()
                }
            })
            .collect();
        let profile = PositionProfile {
            derail_prob: release_prob.clone(),
            release_prob,
        };
        let pmf = release_count_pmf_mainline(&profile, &consist);
        let r: Vec<f64> = profile
            .release_prob
            .iter()
            .zip(consist.flags())
            .filter(|(_, t)| **t)
            .map(|(p, _)| *p)
            .collect();
        let mut oracle = vec![0.0; r.len() + 1];
        for mask in 0u32..(1 << r.len()) {
            let mut w = 1.0;
            for (i, p) in r.iter().enumerate() {
                w *= if mask >> i & 1 == 1 { *p } else { 1.0 - p };
            }
            oracle[mask.count_ones() as usize] += w;
        }
        for (i, o) in oracle.iter().enumerate() {
            worst = worst.max((pmf.mass(i) - o).abs());
        }
        let mean: f64 = r.iter().sum();
        let var: f64 = r.iter().map(|p| p * (1.0 - p)).sum();
        worst_moment = worst_moment.max((pmf.mean() - mean).abs()).max((pmf.variance() - var).abs());
    }
    let e = within_time(start, Duration::from_secs(30))?;
    ensure(worst <= 1e-12, || format!("max pmf error {worst:e}"))?;
    ensure(worst_moment <= 1e-12, || format!("max moment error {worst_moment:e}"))?;
    // Direct call agrees with the tank-filtered path.
    let direct = poisson_binomial(&[0.25, 0.5]);
    ensure(direct.masses() == [0.375, 0.5, 0.125], || format!("{:?}", direct.masses()))?;
    Ok(format!("max pmf error {worst:.1e}, max moment error {worst_moment:.1e}, {e:?}"))
}

fn c4_severity_normalization() -> Check {
    let mut worst_geo = 0.0f64;
    for i in 0..=20 {
        let z = -5.0 + 0.25 * i as f64;
        for lr in 1..=200 {
            let s: f64 = truncated_geometric(z, lr).iter().sum();
            worst_geo = worst_geo.max((s - 1.0).abs());
            let p = linehaul_severity_pmf(z, lr, 1).map_err(|e| e.to_string())?;
            worst_geo = worst_geo.max((p.total() - 1.0).abs());
        }
    }
    ensure(worst_geo <= 1e-12, || format!("geometric max error {worst_geo:e}"))?;
    let yard = YardSeverityParams::default();
    let mut worst_yard = 0.0f64;
    for yt in [YardType::All, YardType::Flat, YardType::Hump] {
        let ge = DiscretizedGe::new(yard.get(yt), yard.max_cars).map_err(|e| e.to_string())?;
        for l in 1..=100 {
            for k in 1..=l {
                let p = yard_switch_severity_pmf(&ge, l, k).map_err(|e| e.to_string())?;
                worst_yard = worst_yard.max((p.total() - 1.0).abs());
            }
        }
    }
    ensure(worst_yard <= 1e-9, || format!("yard max error {worst_yard:e}"))?;
    Ok(format!("geometric {worst_geo:.1e}, yard {worst_yard:.1e}"))
}

fn c5_position_marginals() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let l = rng.gen_range(1..=80);
        let (pod, sev) = if case % 2 == 0 {
            let pod = pod_pmf(BetaParams::new(rng.gen_range(0.3..3.0), rng.gen_range(0.3..3.0)), l);
            let z = -rng.gen_range(0.0..5.0);
            let rows = (1..=l).map(|k| truncated_geometric(z, l - k + 1)).collect();
            (pod, ConditionalSeverity::from_rows(l, rows).unwrap())
        } else {
            (random_pod(&mut rng, l), random_severity(&mut rng, l))
        };
        let lhs: f64 = position_derail_probs(&pod, &sev).iter().sum();
        let rhs: f64 = (1..=l)
            .map(|k| pod.mass(k) * (1..=l - k + 1).map(|x| x as f64 * sev.prob(k, x)).sum::<f64>())
            .sum();
        worst = worst.max((lhs - rhs).abs());
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("max |Σ PD − Σ pod·E[x]| = {worst:.1e}"))
}

fn c6_ad_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for l in 1..=12usize {
        let consists: Vec<Consist> = if l <= 6 {
            (0u32..1 << l)
                .map(|m| Consist::from_flags((0..l).map(|i| m >> i & 1 == 1).collect()))
                .collect()
        } else {
            (0..40).map(|_| random_consist(&mut rng, l)).collect()
        };
        for consist in consists {
            let pod = random_pod(&mut rng, l);
            let sev = random_severity(&mut rng, l);
            let q = rng.gen::<f64>();
            let tt = consist.tank_count();
            let mut derail = vec![0.0; tt + 1];
            let mut release = vec![0.0; tt + 1];
            for k in 1..=l {
                for x in 1..=l - k + 1 {
                    let w = pod.mass(k) * sev.prob(k, x);
                    let n = (k..k + x).filter(|&j| consist.flags()[j - 1]).count();
                    derail[n] += w;
                    for mask in 0u32..1 << n {
                        let r = mask.count_ones() as i32;
                        release[r as usize] += w * q.powi(r) * (1.0 - q).powi(n as i32 - r);
                    }
                }
            }
            let got = ad_tank_derail_pmf(&pod, &sev, &consist);
            let thinned = thin_release_pmf(&got, q, 1.0);
            for i in 0..=tt {
                worst = worst
                    .max((got.mass(i) - derail[i]).abs())
                    .max((thinned.mass(i) - release[i]).abs());
            }
            cases += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("{cases} instances, max error {worst:.1e}"))
}

fn c7_switching() -> Check {
    let yard = YardSeverityParams::default();
    for yt in [YardType::All, YardType::Flat, YardType::Hump] {
        let ge = DiscretizedGe::new(yard.get(yt), yard.max_cars).map_err(|e| e.to_string())?;
        for tt in 1..=20 {
            let sev = ConditionalSeverity::yard(&ge, tt);
            let a = switched_alone(tt, &sev);
            let b = switched_behind_buffer(tt, 0, &sev, yard.max_cars);
            let same = a.len() == b.len()
                && a.masses().iter().zip(b.masses()).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure(same, || format!("{yt:?} tt={tt}: {:?} vs {:?}", a.masses(), b.masses()))?;
        }
    }
    for tt in 1..=20usize {
        let tcc = tt + 19;
        let rows = (1..=tcc)
            .map(|k| {
                let mut r = vec![0.0; tcc - k + 1];
                r[0] = 1.0;
                r
            })
            .collect();
        let sev = ConditionalSeverity::from_rows(tcc, rows).unwrap();
        let p = switched_behind_buffer(tt, 19, &sev, yard.max_cars);
        let want = tt as f64 / tcc as f64;
        ensure(p.mass(1) == want, || format!("tt={tt}: {} vs {want}", p.mass(1)))?;
    }
    Ok("buffer 0 bit-identical for 60 cases; mass(1) = TT/(TT+19) exactly for TT in 1..=20".into())
}

fn c8_monte_carlo() -> Check {
    let study = Study::load(&data_dir().join("demo_scenario.toml")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let cfg = SimConfig::default();
    let report = mc::validate(&study, &cfg, 0.01).map_err(|e| e.to_string())?;
    let e = within_time(start, Duration::from_secs(120))?;
    let gated: Vec<_> = report.comparisons.iter().filter(|c| c.gated).collect();
    let worst = |prefix: &str| {
        gated
            .iter()
            .filter(|c| c.context.starts_with(prefix))
            .map(|c| c.tv_distance)
            .fold(f64::NAN, f64::max)
    };
    let (m, a, s) = (worst("mainline"), worst("arrival_departure"), worst("switching"));
    ensure(m.is_finite() && a.is_finite() && s.is_finite(), || "a context was not simulated".into())?;
    ensure(report.passed, || format!("TV mainline {m:.4}, A/D {a:.4}, switching {s:.4}"))?;
    Ok(format!(
        "{} trials, seed {}: max TV mainline {m:.4}, A/D {a:.4}, switching {s:.4} in {e:?}",
        cfg.trials, cfg.seed
    ))
}

fn single_cause(ctx: CauseContext, tt: TrainType, class: MetricClass) -> CauseTable {
    CauseTable::new(ctx, tt, vec![CauseRow::new("only", 100.0, class)]).unwrap()
}

fn c9_rate_arithmetic() -> Check {
    let rates = RateTable::builtin();
    let unit = TrainConfig::new(TrainType::Unit, 100, 14_300.0, None, true, Consist::all_tank(100)).unwrap();
    let manifest =
        TrainConfig::new(TrainType::Manifest, 80, 8_800.0, None, false, "N30 T20 N30".parse().unwrap()).unwrap();
    let seg = RouteSegment::new("s", 250.0, 40.0);
    let plan = YardPlan {
        intermediate_yards: 3,
        yard_type: YardType::Hump,
        switching_approach: SwitchingApproach::SwitchedAlone,
    };
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| worst = worst.max(rel_err(got, want));
    let ml = |t: &TrainConfig, class| {
        mainline_derailment_prob(t, &seg, &rates, &single_cause(CauseContext::Mainline, t.train_type(), class)).unwrap()
    };
    check(ml(&unit, MetricClass::TrainMiles), 0.85 * 250.0 / 1e6);
    check(ml(&unit, MetricClass::TonMiles), 0.10 * 14_300.0 * 250.0 / 1e9);
    check(ml(&unit, MetricClass::CarMiles), 8.14 * 100.0 * 250.0 / 1e9);
    check(ml(&manifest, MetricClass::TrainMiles), 0.67 * 250.0 / 1e6);
    check(ml(&manifest, MetricClass::TonMiles), 0.14 * 8_800.0 * 250.0 / 1e9);
    check(ml(&manifest, MetricClass::CarMiles), 11.39 * 80.0 * 250.0 / 1e9);
    let mixed = CauseTable::new(
        CauseContext::Mainline,
        TrainType::Unit,
        vec![
            CauseRow::new("a", 50.0, MetricClass::TrainMiles),
            CauseRow::new("b", 30.0, MetricClass::TonMiles),
            CauseRow::new("c", 20.0, MetricClass::CarMiles),
        ],
    )
    .unwrap();
    check(
        mainline_derailment_prob(&unit, &seg, &rates, &mixed).unwrap(),
        0.5 * 0.85 * 250.0 / 1e6 + 0.3 * 0.10 * 14_300.0 * 250.0 / 1e9 + 0.2 * 8.14 * 100.0 * 250.0 / 1e9,
    );
    let n = 8.0;
    let ad = |t: &TrainConfig, class| {
        ad_derailment_prob(t, &plan, &rates, &single_cause(CauseContext::Ad, t.train_type(), class)).unwrap()
    };
    // Loaded unit trains at terminals use the loaded-train rates.
    check(ad(&unit, MetricClass::TrainEvents), 126.31 * n / 1e6);
    check(ad(&unit, MetricClass::CarEvents), 1.22 * 100.0 * n / 1e9);
    check(ad(&manifest, MetricClass::TrainEvents), 36.53 * n / 1e6);
    check(ad(&manifest, MetricClass::CarEvents), 0.62 * 80.0 * n / 1e9);
    check(switching_derailment_prob(&manifest, &plan, &rates).unwrap(), 6.49 / 1e6 * 80.0 * 4.0);
    ensure(worst <= 1e-15, || format!("max relative error {worst:e}"))?;
    Ok(format!("12 hand evaluations, max relative error {worst:.1e}"))
}

const ONE_SEGMENT: &str = r#"
name = "one-segment"

[train.unit]
length_cars = 5
gross_tonnage = 715.0
loaded = true
consist = "T5"

[train.manifest]
length_cars = 10
gross_tonnage = 1100.0
consist = "N3 T4 N3"

[[route.segments]]
segment_id = "only"
length_miles = 200.0
derailment_speed_mph = 35.0

[yards]
intermediate_yards = 1
yard_type = "all"
switching_approach = "switched_en_masse"

[release]
cpr = 0.25

[demand]
tank_cars_required = 30
unit_capacity = 5
manifest_capacity = 4

[curves]
file = "linear.csv"
"#;

/// Premixed curves with `C(x, t) = x / 1000`.
fn linear_curves() -> String {
    let mut s = String::from("location_class,wind_class,anchor_gallons,time_min,casualties\n");
    for a in [30_000, 90_000, 150_000] {
        for t in [0, 4, 120] {
            s.push_str(&format!("mixed,mixed,{a},{t},{}\n", a / 1000));
        }
    }
    s
}

fn hand_demand_tc(study: &Study, tt: TrainType) -> f64 {
    let s = &study.scenario;
    let train = s.train(tt);
    let cpr = s.release.cpr;
    let yard_q = cpr * s.release.yard_speed_factor;
    let per_car: f64 = s
        .release
        .quantity_table
        .rows()
        .iter()
        .map(|r| r.lading_loss_gallons as f64 * r.probability)
        .sum();
    let tanks = |from: usize, to: usize| (from..=to).filter(|&j| train.consist().is_tank(j)).count() as f64;
    let l = train.length_cars();

    let seg = &s.route[0];
    let (pod, sev) = mainline_models(s, train, seg);
    let p_seg = mainline_derailment_prob(train, seg, &study.rates, study.causes.get(CauseContext::Mainline, tt).unwrap()).unwrap();
    let mainline_n: f64 = (1..=l)
        .filter(|&j| train.consist().is_tank(j))
        .map(|j| (1..=j).map(|k| pod.mass(k) * sev.survival(k, j - k + 1)).sum::<f64>() * cpr)
        .sum();

    let (ad_pod, ad_sev) = ad_models(s, train);
    let p_ad = ad_derailment_prob(train, &s.yards, &study.rates, study.causes.get(CauseContext::Ad, tt).unwrap()).unwrap();
    let ad_n: f64 = (1..=l)
        .map(|k| ad_pod.mass(k) * (1..=l - k + 1).map(|x| ad_sev.prob(k, x) * tanks(k, k + x - 1)).sum::<f64>())
        .sum::<f64>()
        * yard_q;

    let sw = match tt {
        TrainType::Unit => 0.0,
        TrainType::Manifest => {
            let p = switching_derailment_prob(train, &s.yards, &study.rates).unwrap();
            let block = train.tank_count();
            let tcc = block + 19;
            let ge = yard_ge(s).unwrap();
            let sev = ConditionalSeverity::yard(&ge, tcc);
            let n: f64 = (1..=tcc)
                .map(|k| {
                    (1..=tcc - k + 1)
                        .map(|x| {
                            let last = k + x - 1;
                            sev.prob(k, x) * last.saturating_sub((k - 1).max(19)) as f64
                        })
                        .sum::<f64>()
                        / tcc as f64
                })
                .sum();
            p * n * yard_q
        }
    };
    let shipments = s.demand.tank_cars_required.div_ceil(s.demand.capacity(tt)) as f64;
    shipments * (p_seg * mainline_n + p_ad * ad_n + sw) * per_car / 1000.0
}

fn c10_aggregation() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fs::write(dir.path().join("linear.csv"), linear_curves()).map_err(|e| e.to_string())?;
    let path = dir.path().join("one.toml");
    fs::write(&path, ONE_SEGMENT).map_err(|e| e.to_string())?;
    let study = Study::load(&path).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for tt in [TrainType::Unit, TrainType::Manifest] {
        let a = study.analyze_option(tt, &[4.0, 120.0]).map_err(|e| e.to_string())?;
        let want = hand_demand_tc(&study, tt);
        for v in &a.demand_tc {
            worst = worst.max(rel_err(v.value, want));
        }
    }
    ensure(worst <= 1e-12, || format!("demand TC relative error {worst:e}"))?;

    // Shipment count steps up right after each multiple of capacity.
    let mut s = study.scenario.clone();
    for tt in [TrainType::Unit, TrainType::Manifest] {
        let c = s.demand.capacity(tt);
        let per = study.analyze_option(tt, &[30.0]).unwrap().per_shipment_tc[0].value;
        for delta in 1..=4 * c {
            s.demand.tank_cars_required = delta;
            let n = s.demand.shipments(tt);
            ensure(n == delta / c + u32::from(delta % c != 0), || format!("{tt} δ={delta}: {n} shipments"))?;
            if delta > 1 {
                let prev = Some(delta - 1).map(|d| d.div_ceil(c)).unwrap();
                ensure((n > prev) == ((delta - 1) % c == 0), || format!("{tt}: jump misplaced at δ={delta}"))?;
            }
        }
        for delta in [c - 1, c, c + 1, 2 * c, 2 * c + 1] {
            s.demand.tank_cars_required = delta;
            let st = Study::new(s.clone(), study.rates.clone(), study.causes.clone(), study.curves.clone()).unwrap();
            let a = st.analyze_option(tt, &[30.0]).unwrap();
            ensure(a.demand_tc[0].value == per * delta.div_ceil(c) as f64, || format!("{tt} δ={delta}"))?;
        }
    }

    // Arrival/departure events per shipment.
    let unit = study.scenario.train(TrainType::Unit);
    let causes = single_cause(CauseContext::Ad, TrainType::Unit, MetricClass::TrainEvents);
    for m in 0..=5u32 {
        let plan = YardPlan {
            intermediate_yards: m,
            ..study.scenario.yards
        };
        ensure(plan.ad_events() == 2 + 2 * m, || format!("m={m}"))?;
        let p = ad_derailment_prob(unit, &plan, &study.rates, &causes).unwrap();
        ensure(rel_err(p, 126.31 * f64::from(2 + 2 * m) / 1e6) <= 1e-15, || format!("m={m}: {p}"))?;
    }
    Ok(format!("demand TC max relative error {worst:.1e}; ceiling steps and n = 2 + 2m verified"))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_railrisk"))
        .args(args)
        .env_remove("RAILRISK_TABLES")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    Ok(out.stdout)
}

fn c11_determinism() -> Check {
    let demo = data_dir().join("demo_scenario.toml");
    let demo = demo.to_str().unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}.json"))).collect();
    for f in &files {
        run_cli(&["run", "--scenario", demo, "--times", "4,30,120", "--output", f.to_str().unwrap()])?;
    }
    let read = |p: &Path| fs::read(p).map_err(|e| e.to_string());
    let (a, b) = (read(&files[0])?, read(&files[1])?);
    ensure(!a.is_empty() && a == b, || "reports differ".into())?;
    let stdout = run_cli(&["run", "--scenario", demo, "--times", "4,30,120"])?;
    ensure(stdout == a, || "stdout report differs from file report".into())?;

    let text = fs::read_to_string(demo).map_err(|e| e.to_string())?;
    let s = scenario_from_toml(&text).map_err(|e| e.to_string())?;
    let once = scenario_to_toml(&s).map_err(|e| e.to_string())?;
    let back = scenario_from_toml(&once).map_err(|e| e.to_string())?;
    ensure(back == s, || "scenario changed on round trip".into())?;
    ensure(scenario_to_toml(&back).unwrap() == once, || "serialized form not stable".into())?;
    Ok(format!("{} byte report identical across runs; scenario round-trips", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("worked quantity example", c1_worked_quantity),
        ("lading-loss table sums to one", c2_table_sum),
        ("Poisson-binomial exactness", c3_poisson_binomial),
        ("severity normalization", c4_severity_normalization),
        ("position-marginal identity", c5_position_marginals),
        ("arrival/departure brute force", c6_ad_brute_force),
        ("switching approaches", c7_switching),
        ("Monte Carlo agreement", c8_monte_carlo),
        ("rate arithmetic", c9_rate_arithmetic),
        ("aggregation", c10_aggregation),
        ("determinism and round trip", c11_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
