mod common;

use std::fs;

use common::*;
use ldes_core::system::{DurationClass, Requirement, ReserveKind, ReserveProduct};
use ldes_core::{builtin_system, load_system, save_system, validate_system, BuiltinName, Error, Profile};
use proptest::prelude::*;

const MINIMAL: &str = r#"{
  "buses": [{"id": "B1", "angle_min": -0.5, "angle_max": 0.5, "is_reference": true}],
  "thermal": [{"id": "G1", "bus": "B1", "p_min": 0, "p_max": 50, "ramp_up": 50, "ramp_down": 50,
               "fuel_cost": 20, "start_cost": 0, "stop_cost": 0, "initial_online": false, "initial_output": 0}],
  "loads": {"B1": [10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10]},
  "horizon_hours": 24,
  "base_power": 100
}"#;

#[test]
fn minimal_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sys.json");
    fs::write(&path, MINIMAL).unwrap();
    let sys = load_system(&path).unwrap();
    assert_eq!(sys.horizon_hours, 24);
    assert_eq!(sys.total_load(7), 10.0);
}

#[test]
fn csv_series_reference_resolves() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (1..=24).map(|h| format!("{h},{}\n", 5 + h)).collect();
    fs::write(dir.path().join("load.csv"), format!("hour,b1\n{rows}")).unwrap();
    let text = MINIMAL.replace(
        r#""B1": [10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10,10]"#,
        r#""B1": {"csv": "load.csv", "column": "b1"}"#,
    );
    fs::write(dir.path().join("sys.json"), text).unwrap();
    let sys = load_system(dir.path().join("sys.json")).unwrap();
    assert_eq!(sys.loads["B1"][0], 6.0);
    assert_eq!(sys.loads["B1"][23], 29.0);
}

#[test]
fn malformed_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"buses\": [\n").unwrap();
    match load_system(&path) {
        Err(Error::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn soc_min_above_soc_max_names_device_and_fields() {
    let mut sys = one_bus(vec![10.0; 24]);
    let mut s = store("S1", 10.0, 40.0, 0.9);
    s.soc_min = 50.0;
    sys.storage.push(s);
    let v = validate_system(&sys);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].entity, "S1");
    assert!(v[0].field.contains("soc_min") && v[0].field.contains("soc_max"));
}

#[test]
fn line_to_missing_bus() {
    let mut sys = one_bus(vec![10.0; 24]);
    sys.lines.push(line("L1", "B1", "B9", 10.0, 100.0));
    let v = validate_system(&sys);
    assert!(v.iter().any(|x| x.rule == "unknown bus B9"), "{v:?}");
}

#[test]
fn two_reference_buses() {
    let mut sys = one_bus(vec![10.0; 24]);
    sys.buses.push(bus("B2", true));
    sys.lines.push(line("L1", "B1", "B2", 10.0, 100.0));
    let v = validate_system(&sys);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].rule, "multiple reference buses");
}

#[test]
fn short_availability_series() {
    let mut sys = one_bus(vec![10.0; 24]);
    sys.vre.push(solar("PV1", 10.0, vec![0.5; 23]));
    let v = validate_system(&sys);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].entity, "PV1");
}

#[test]
fn builtins_are_valid() {
    for name in [BuiltinName::Mini3, BuiltinName::Pjm5like] {
        for profile in [Profile::SolarDriven, Profile::WindDriven] {
            let sys = builtin_system(name, profile);
            assert_eq!(validate_system(&sys), vec![], "{name} {profile}");
        }
    }
}

#[test]
fn mini3_shape_and_efficiencies() {
    for profile in [Profile::SolarDriven, Profile::WindDriven] {
        let sys = builtin_system(BuiltinName::Mini3, profile);
        assert_eq!((sys.buses.len(), sys.lines.len(), sys.thermal.len(), sys.vre.len()), (3, 3, 2, 2));
        assert_eq!(sys.horizon_hours, 336);
        let short: Vec<_> = sys.storage.iter().filter(|s| s.duration_class == DurationClass::Short).collect();
        let long: Vec<_> = sys.storage.iter().filter(|s| s.duration_class == DurationClass::Long).collect();
        assert_eq!((short.len(), long.len()), (1, 1));
        assert!((short[0].round_trip() - 0.80).abs() < 1e-9);
        assert!((short[0].duration_hours() - 4.0).abs() < 1e-9);
        assert!((long[0].round_trip() - 0.65).abs() < 1e-9);
        assert!(long[0].duration_hours() >= 10.0);
    }
}

#[test]
fn pjm5like_component_counts() {
    let sys = builtin_system(BuiltinName::Pjm5like, Profile::SolarDriven);
    assert_eq!(sys.buses.len(), 5);
    assert_eq!(sys.lines.len(), 6);
    assert_eq!(sys.thermal.len() + sys.vre.len(), 8);
    assert_eq!(sys.horizon_hours, 8760);
}

#[test]
fn net_load_examples() {
    let mut sys = one_bus(vec![100.0; 24]);
    let mut pv = solar("PV1", 40.0, vec![0.9; 24]);
    pv.forecast = Some(vec![0.5; 24]);
    sys.vre.push(pv);
    assert_eq!(sys.net_load(0..24).unwrap(), vec![80.0; 24]);

    let bare = one_bus(vec![100.0, 90.0, 80.0]);
    assert_eq!(bare.net_load(0..3).unwrap(), vec![100.0, 90.0, 80.0]);

    let mut windy = one_bus(vec![50.0; 24]);
    windy.vre.push(wind("W1", 100.0, vec![0.8; 24]));
    assert_eq!(windy.net_load(3..4).unwrap(), vec![-30.0]);

    assert!(matches!(sys.net_load(0..25), Err(Error::Range(_))));
}

#[test]
fn reserve_requirement_examples() {
    let mut sys = one_bus(vec![100.0; 24]);
    sys.vre.push(wind("W1", 100.0, vec![0.5; 24]));
    sys.vre.push(solar("PV1", 50.0, vec![0.5; 24]));
    let r = rule("spin", 0.05, 0.10, 0.04);
    assert!((sys.reserve_requirement(&r, 0).unwrap() - 11.0).abs() < 1e-12);

    let reg = one_bus(vec![200.0; 24]);
    assert!((reg.reserve_requirement(&rule("reg", 0.05, 0.0, 0.0), 5).unwrap() - 10.0).abs() < 1e-12);

    let mut series = vec![0.0; 24];
    series[0] = 3.0;
    series[1] = 7.0;
    let p = ReserveProduct { id: "s".into(), kind: ReserveKind::RegulationUp, requirement: Requirement::Series(series) };
    // hour 2 in 1-based terms
    assert_eq!(reg.reserve_requirement(&p, 1).unwrap(), 7.0);
    assert!(matches!(reg.reserve_requirement(&p, 24), Err(Error::Range(_))));
}

#[test]
fn save_load_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for profile in [Profile::SolarDriven, Profile::WindDriven] {
        let sys = builtin_system(BuiltinName::Mini3, profile);
        let path = dir.path().join(format!("{profile}.json"));
        save_system(&sys, &path).unwrap();
        let back = load_system(&path).unwrap();
        assert_eq!(back, sys);
        assert_eq!(back.fingerprint(), sys.fingerprint());
    }
}

#[test]
fn fingerprint_tracks_content() {
    let a = builtin_system(BuiltinName::Mini3, Profile::SolarDriven);
    let b = builtin_system(BuiltinName::Mini3, Profile::WindDriven);
    assert_eq!(a.fingerprint(), builtin_system(BuiltinName::Mini3, Profile::SolarDriven).fingerprint());
    assert_ne!(a.fingerprint(), b.fingerprint());
}

proptest! {
    #[test]
    fn net_load_is_linear(
        load in prop::collection::vec(0.0f64..500.0, 24),
        avail in prop::collection::vec(0.0f64..=1.0, 24),
        cap in 0.0f64..300.0,
    ) {
        let mut sys = one_bus(load.clone());
        sys.vre.push(wind("W1", cap, avail.clone()));
        let base = sys.net_load(0..24).unwrap();
        let mut doubled = one_bus(load.iter().map(|x| 2.0 * x).collect());
        doubled.vre.push(wind("W1", 2.0 * cap, avail));
        let twice = doubled.net_load(0..24).unwrap();
        for (a, b) in base.iter().zip(&twice) {
            prop_assert!((2.0 * a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rule_requirement_non_negative(
        load in 0.0f64..1000.0,
        w in 0.0f64..=1.0,
        s in 0.0f64..=1.0,
        fl in 0.0f64..0.5,
        fw in 0.0f64..0.5,
        fs in 0.0f64..0.5,
    ) {
        let mut sys = one_bus(vec![load; 24]);
        sys.vre.push(wind("W1", 100.0, vec![w; 24]));
        sys.vre.push(solar("PV1", 100.0, vec![s; 24]));
        prop_assert!(sys.reserve_requirement(&rule("r", fl, fw, fs), 0).unwrap() >= 0.0);
    }
}
