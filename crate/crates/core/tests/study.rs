use std::fs;
use std::path::PathBuf;

use railrisk_core::pipeline::{CAUSES_FILE, RATES_FILE};
use railrisk_core::scenario::tables::{DEFAULT_CAUSES_CSV, DEFAULT_RATES_CSV};
use railrisk_core::scenario::{scenario_from_toml, scenario_to_toml, TrainType};
use railrisk_core::{Error, Study};

fn demo_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo_scenario.toml")
}

#[test]
fn demo_loads_and_multiplies_shipments() {
    let study = Study::load(&demo_path()).unwrap();
    let [unit, manifest] = study.analyze(&[4.0, 30.0, 120.0]).unwrap();
    assert_eq!(unit.shipments, 3);
    assert_eq!(manifest.shipments, 13);
    assert!(unit.switching.is_none());
    assert!(manifest.switching.is_some());
    for (p, d) in unit.per_shipment_tc.iter().zip(&unit.demand_tc) {
        assert_eq!(d.value, 3.0 * p.value);
    }
    // Longer response means more casualties.
    assert!(unit.demand_tc[0].value < unit.demand_tc[2].value);
}

#[test]
fn table_dir_overrides_builtin_rates() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(RATES_FILE), DEFAULT_RATES_CSV.replace("unit,mainline,train_miles,0.85", "unit,mainline,train_miles,1.70")).unwrap();
    fs::write(dir.path().join(CAUSES_FILE), DEFAULT_CAUSES_CSV).unwrap();
    let base = Study::load(&demo_path()).unwrap().analyze_option(TrainType::Unit, &[]).unwrap();
    let bumped = Study::load_with(&demo_path(), Some(dir.path()))
        .unwrap()
        .analyze_option(TrainType::Unit, &[])
        .unwrap();
    assert!(bumped.segments[0].derailment.probability > base.segments[0].derailment.probability);
    assert_eq!(bumped.ad.derailment.probability, base.ad.derailment.probability);
}

#[test]
fn missing_table_dir_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Study::load_with(&demo_path(), Some(dir.path())), Err(Error::Io { .. })));
}

#[test]
fn mileage_factor_scales_mainline_only() {
    let text = fs::read_to_string(demo_path()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::copy(
        demo_path().with_file_name("curves_placeholder.csv"),
        dir.path().join("curves_placeholder.csv"),
    )
    .unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, format!("{text}\n[options]\nmainline_mileage_factor = true\n")).unwrap();
    let on = Study::load(&path).unwrap().analyze_option(TrainType::Unit, &[30.0]).unwrap();
    let off = Study::load(&demo_path()).unwrap().analyze_option(TrainType::Unit, &[30.0]).unwrap();
    for (a, b) in on.segments.iter().zip(&off.segments) {
        assert_eq!(a.incident.weighted_tc[0].value, b.incident.tc[0].value * b.segment.length_miles);
    }
    assert_eq!(on.yard_tc, off.yard_tc);
}

#[test]
fn demo_round_trips() {
    let text = fs::read_to_string(demo_path()).unwrap();
    let s = scenario_from_toml(&text).unwrap();
    assert_eq!(scenario_from_toml(&scenario_to_toml(&s).unwrap()).unwrap(), s);
}
