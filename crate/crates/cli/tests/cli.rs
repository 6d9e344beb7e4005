use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ldes_core::audit::audit_schedule;
use ldes_core::io::read_schedule_csv;
use ldes_core::metrics::{Comparison, MetricsReport};
use ldes_core::system::{Bus, DurationClass, StorageDevice, ThermalGenerator};
use ldes_core::{builtin_system, save_system, BuiltinName, PowerSystem, Profile};
use tempfile::TempDir;

fn ldes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldes")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> MetricsReport {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn tight_store_system() -> PowerSystem {
    let mut loads = BTreeMap::new();
    loads.insert("B1".to_string(), vec![20.0; 72]);
    PowerSystem {
        buses: vec![Bus { id: "B1".into(), angle_min: -1.0, angle_max: 1.0, is_reference: true }],
        lines: vec![],
        thermal: vec![ThermalGenerator {
            id: "G1".into(),
            bus: "B1".into(),
            p_min: 0.0,
            p_max: 100.0,
            ramp_up: 100.0,
            ramp_down: 100.0,
            fuel_cost: 20.0,
            start_cost: 0.0,
            stop_cost: 0.0,
            initial_online: true,
            initial_output: 20.0,
        }],
        vre: vec![],
        // 1 MW of charging cannot fill 1000 MWh in 48 h
        storage: vec![StorageDevice {
            id: "L1".into(),
            bus: "B1".into(),
            charge_max: 1.0,
            discharge_max: 1.0,
            soc_min: 0.0,
            soc_max: 1000.0,
            eff_charge: 0.9,
            eff_discharge: 0.9,
            self_discharge: 0.0,
            initial_soc: 0.0,
            duration_class: DurationClass::Long,
        }],
        reserves: vec![],
        loads,
        horizon_hours: 72,
        base_power: 100.0,
    }
}

#[test]
fn run_writes_consistent_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("tr");
    let o = ldes(&["run", "--builtin", "mini3", "--strategy", "TR", "--hours", "96", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["schedule.csv", "metrics.json", "metrics.csv", "timing.json", "windows.csv", "run.log", "config.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join("forecast.csv").exists());
    let rep = report(&out);
    assert_eq!((rep.strategy.as_str(), rep.hours, rep.windows), ("TR", 96, 3));
    assert_eq!(data_rows(&out.join("windows.csv")), 3);

    // the schedule on disk carries the reported cost and passes the physical checks
    let sys = builtin_system(BuiltinName::Mini3, Profile::SolarDriven).with_horizon(96).unwrap();
    let sched = read_schedule_csv(&sys, fs::File::open(out.join("schedule.csv")).unwrap()).unwrap();
    let total = sched.objective.production_cost();
    assert!((total - rep.production_cost.total).abs() <= 1e-6 * (1.0 + total.abs()));
    let audit = audit_schedule(&sys, &sched);
    assert!(audit.passes(1e-6), "{audit:?}");
    assert!(fs::read_to_string(out.join("run.log")).unwrap().contains("window=3 start_hour=49 "));
}

#[test]
fn unknown_strategy_lists_valid_names() {
    let tmp = TempDir::new().unwrap();
    let o = ldes(&["run", "--strategy", "XYZ", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for name in ["ID", "ID-LP", "TR", "ELH", "EVT-LA", "EVT-LA-MT", "EV"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn week_lookahead_window_counts_follow_tail_mode() {
    // 250 h: truncate keeps starts 1, 25, 49; clamp adds a shortened fourth window at 73
    let tmp = TempDir::new().unwrap();
    for (tail, windows) in [("truncate", 3), ("clamp", 4)] {
        let out = tmp.path().join(tail);
        let o = ldes(&[
            "run", "--strategy", "ELH", "--lookahead-days", "7", "--tail", tail, "--hours", "250",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(data_rows(&out.join("windows.csv")), windows, "{tail}");
        assert_eq!(report(&out).strategy, "ELH-1w");
    }
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("scenario.json");
    fs::write(&cfg, r#"{"builtin": "mini3", "profile": "wind", "strategy": "ELH-3d", "hours": 48, "out": "from_file"}"#).unwrap();
    let o = ldes(&["run", "--config", cfg.to_str().unwrap(), "--strategy", "TR"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep = report(&tmp.path().join("from_file"));
    assert_eq!((rep.strategy.as_str(), rep.hours), ("TR", 48));
    let wind = builtin_system(BuiltinName::Mini3, Profile::WindDriven).with_horizon(48).unwrap();
    assert_eq!(rep.fingerprint, wind.fingerprint());

    fs::write(&cfg, r#"{"strategy": "TR", "colour": "blue"}"#).unwrap();
    assert_eq!(code(&ldes(&["run", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&ldes(&["run", "--config", tmp.path().join("none.json").to_str().unwrap()])), 1);
}

#[test]
fn bad_flag_values_are_configuration_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    for args in [
        vec!["--network", "mesh"],
        vec!["--tail", "wrap"],
        vec!["--evt", "firm", "--strategy", "EVT-LA"],
        vec!["--forecast-error", "tidal=0.1"],
        vec!["--strategy", "ELH"],
        vec!["--strategy", "ID", "--lookahead-days", "2"],
        vec!["--hours", "100000"],
        vec!["--builtin", "rts"],
    ] {
        let mut full = vec!["run", "--out", out];
        full.extend(&args);
        assert_eq!(code(&ldes(&full)), 2, "{args:?}");
    }
}

#[test]
fn forecast_run_writes_forecast_series() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("fc");
    let o = ldes(&[
        "run", "--profile", "wind", "--hours", "48", "--forecast-error", "solar=0.03,wind=0.06", "--seed", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("forecast.csv")).unwrap();
    assert!(text.starts_with("hour,unit,actual_mw,forecast_mw\n1,"));
    let sys = builtin_system(BuiltinName::Mini3, Profile::WindDriven);
    assert_eq!(text.lines().count(), 1 + 48 * sys.vre.len());
}

#[test]
fn unreachable_hard_target_is_a_solver_failure() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("tight.json");
    save_system(&tight_store_system(), &path).unwrap();
    let base = ["run", "--system", path.to_str().unwrap(), "--strategy", "EVT-LA", "--evt-fraction", "1"];
    let out = tmp.path().join("soft");
    let o = ldes(&[&base[..], &["--out", out.to_str().unwrap()]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(report(&out).steering.evt_penalty > 0.0);
    let o = ldes(&[&base[..], &["--evt", "hard", "--out", tmp.path().join("hard").to_str().unwrap()]].concat());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn compare_reports_reductions_against_baseline() {
    let tmp = TempDir::new().unwrap();
    let o = ldes(&[
        "compare", "--profile", "wind", "--hours", "96", "--strategies", "TR,ID,EVT-LA-MT,TR", "--jobs", "2",
        "--out", tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for d in ["TR", "ID", "EVT-LA-MT", "TR-2"] {
        assert!(tmp.path().join(d).join("metrics.json").is_file(), "{d}");
    }
    let rows: Vec<Comparison> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("comparison.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let gap = 1e-5 * rows[0].baseline_cost + 1e-4;
    assert_eq!(rows[0].reduction_pct, 0.0);
    assert_eq!(rows[3].reduction_pct, 0.0);
    assert!(rows[1].candidate_cost <= rows[1].baseline_cost + gap);
    let md = fs::read_to_string(tmp.path().join("comparison.md")).unwrap();
    assert_eq!(stdout(&o), md);
    let sys = builtin_system(BuiltinName::Mini3, Profile::WindDriven);
    for dev in &sys.storage {
        assert!(md.contains(&format!("{} CC %", dev.id)) && md.contains(&format!("{} SOC-aware CC %", dev.id)));
    }
    assert!(md.lines().any(|l| l.starts_with("| EVT-LA-MT |")));
}

#[test]
fn compare_adds_a_missing_baseline() {
    let tmp = TempDir::new().unwrap();
    let o = ldes(&["compare", "--hours", "48", "--strategies", "EV-025", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<Comparison> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("comparison.json")).unwrap()).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.candidate.as_str()).collect();
    assert_eq!(names, ["TR", "EV-025"]);
    assert!(rows.iter().all(|r| r.baseline == "TR"));
}

#[test]
fn validate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let good = tmp.path().join("good.json");
    save_system(&builtin_system(BuiltinName::Mini3, Profile::SolarDriven), &good).unwrap();
    let o = ldes(&["validate", good.to_str().unwrap()]);
    assert_eq!((code(&o), stdout(&o).as_str()), (0, "OK\n"));

    let mut broken = builtin_system(BuiltinName::Mini3, Profile::SolarDriven);
    broken.thermal[0].bus = "NOWHERE".into();
    let bad = tmp.path().join("bad.json");
    save_system(&broken, &bad).unwrap();
    let o = ldes(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains(&broken.thermal[0].id), "{}", stdout(&o));

    assert_eq!(code(&ldes(&["validate", tmp.path().join("missing.json").to_str().unwrap()])), 1);
    fs::write(tmp.path().join("junk.json"), "{ not json").unwrap();
    assert_eq!(code(&ldes(&["validate", tmp.path().join("junk.json").to_str().unwrap()])), 2);
}

#[test]
fn mt_targets_to_stdout_and_file() {
    let o = ldes(&["mt-targets", "--profile", "wind"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("day,device,target_mwh\n"));
    assert_eq!(text.lines().count(), 1 + 14);

    let tmp = TempDir::new().unwrap();
    let o = ldes(&["mt-targets", "--devices", "BESS4h,LDES24h", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&tmp.path().join("mt_targets.csv")), 28);
    assert_eq!(code(&ldes(&["mt-targets", "--devices", "NOPE"])), 2);
}

#[test]
fn report_collects_runs() {
    let tmp = TempDir::new().unwrap();
    let mut dirs = Vec::new();
    for s in ["TR", "EV-01"] {
        let d = tmp.path().join(s);
        let o = ldes(&["run", "--hours", "48", "--strategy", s, "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        dirs.push(d.to_str().unwrap().to_string());
    }
    let mut args = vec!["report"];
    args.extend(dirs.iter().map(String::as_str));
    let o = ldes(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("strategy,hours,windows,"));
    assert!(lines[1].starts_with("TR,48,") && lines[2].starts_with("EV-01,48,"));
    assert_eq!(code(&ldes(&["report", tmp.path().to_str().unwrap()])), 1);
}
