#![allow(dead_code)]

use std::collections::BTreeMap;

use ldes_core::system::{
    Bus, DurationClass, PowerSystem, Requirement, ReserveKind, ReserveProduct, StorageDevice, ThermalGenerator,
    TransmissionLine, VreGenerator, VreKind,
};
use ldes_core::ucd::{build_ucd, extract_schedule, BoundaryState, DispatchSchedule, FormulationOptions, HorizonSpec};
use ldes_milp::{solve_lp, solve_milp, Solution, SolverOptions};

pub fn bus(id: &str, reference: bool) -> Bus {
    Bus { id: id.into(), angle_min: -1.0, angle_max: 1.0, is_reference: reference }
}

pub fn thermal(id: &str, p_min: f64, p_max: f64, fuel: f64) -> ThermalGenerator {
    ThermalGenerator {
        id: id.into(),
        bus: "B1".into(),
        p_min,
        p_max,
        ramp_up: p_max,
        ramp_down: p_max,
        fuel_cost: fuel,
        start_cost: 0.0,
        stop_cost: 0.0,
        initial_online: false,
        initial_output: 0.0,
    }
}

pub fn store(id: &str, power: f64, energy: f64, eff: f64) -> StorageDevice {
    StorageDevice {
        id: id.into(),
        bus: "B1".into(),
        charge_max: power,
        discharge_max: power,
        soc_min: 0.0,
        soc_max: energy,
        eff_charge: eff,
        eff_discharge: eff,
        self_discharge: 0.0,
        initial_soc: 0.0,
        duration_class: DurationClass::Long,
    }
}

pub fn solar(id: &str, capacity: f64, availability: Vec<f64>) -> VreGenerator {
    VreGenerator { id: id.into(), bus: "B1".into(), kind: VreKind::Solar, capacity, availability, forecast: None }
}

pub fn wind(id: &str, capacity: f64, availability: Vec<f64>) -> VreGenerator {
    VreGenerator { id: id.into(), bus: "B1".into(), kind: VreKind::Wind, capacity, availability, forecast: None }
}

pub fn rule(id: &str, load: f64, wind: f64, solar: f64) -> ReserveProduct {
    ReserveProduct {
        id: id.into(),
        kind: ReserveKind::SpinUp,
        requirement: Requirement::Rule { load_fraction: load, wind_forecast_fraction: wind, solar_forecast_fraction: solar },
    }
}

/// One reference bus `B1` carrying `load`.
pub fn one_bus(load: Vec<f64>) -> PowerSystem {
    let mut loads = BTreeMap::new();
    let horizon_hours = load.len();
    loads.insert("B1".to_string(), load);
    PowerSystem {
        buses: vec![bus("B1", true)],
        lines: vec![],
        thermal: vec![],
        vre: vec![],
        storage: vec![],
        reserves: vec![],
        loads,
        horizon_hours,
        base_power: 100.0,
    }
}

pub fn line(id: &str, from: &str, to: &str, b: f64, limit: f64) -> TransmissionLine {
    TransmissionLine {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        susceptance: b,
        flow_min: -limit,
        flow_max: limit,
    }
}

/// First `hours` hours of `sys`.
pub fn shorten(sys: &PowerSystem, hours: usize) -> PowerSystem {
    sys.with_horizon(hours).expect("shorter horizon")
}

pub fn solver() -> SolverOptions {
    SolverOptions::default()
}

/// Builds and solves one window from the system's initial state.
pub fn solve_window(sys: &PowerSystem, horizon: HorizonSpec, form: &FormulationOptions) -> (Solution, DispatchSchedule) {
    let (lp, idx) = build_ucd(sys, horizon, &BoundaryState::initial(sys), form).expect("model builds");
    let sol = if form.relax_binaries { solve_lp(&lp, &solver()) } else { solve_milp(&lp, &solver()) }.expect("solves");
    assert!(sol.status.has_incumbent(), "status {}", sol.status);
    let sched = extract_schedule(sys, &sol, &idx).expect("extracts");
    (sol, sched)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
