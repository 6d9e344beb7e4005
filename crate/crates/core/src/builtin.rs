//! Built-in desk-scale test systems.
//!
//! All numbers below are invented and frozen; the hourly shapes come from
//! closed-form daily curves modulated by a fixed integer hash, so they are
//! identical on every platform. Storage round-trip efficiencies are split
//! evenly between charging and discharging (`eff = sqrt(round_trip)`).
//!
//! `mini3`: 3 buses, 3 lines, 2 thermal units (a cheap base unit and an
//! expensive peaker), 1 solar, 1 wind, a 4 h / 80 % short-duration battery and
//! a 24 h / 65 % long-duration store, 336 h. Weather runs in multi-day spells so
//! that long look-ahead has something to gain.
//!
//! `pjm5like`: the classic 5-bus / 6-line layout with 5 thermal units, 2 solar
//! and 1 wind plant (8 generators), both storage classes, 8760 h.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::system::{
    Bus, DurationClass, PowerSystem, Requirement, ReserveKind, ReserveProduct, StorageDevice, ThermalGenerator,
    TransmissionLine, VreGenerator, VreKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    Mini3,
    Pjm5like,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    SolarDriven,
    WindDriven,
}

impl FromStr for BuiltinName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mini3" => Ok(Self::Mini3),
            "pjm5like" => Ok(Self::Pjm5like),
            _ => Err(format!("unknown builtin system {s:?} (expected mini3 or pjm5like)")),
        }
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mini3 => "mini3",
            Self::Pjm5like => "pjm5like",
        })
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "solar" | "solar_driven" => Ok(Self::SolarDriven),
            "wind" | "wind_driven" => Ok(Self::WindDriven),
            _ => Err(format!("unknown profile {s:?} (expected solar or wind)")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SolarDriven => "solar",
            Self::WindDriven => "wind",
        })
    }
}

pub fn builtin_system(name: BuiltinName, profile: Profile) -> PowerSystem {
    match name {
        BuiltinName::Mini3 => mini3(profile),
        BuiltinName::Pjm5like => pjm5like(profile),
    }
}

/// Uniform draw in [0, 1) from a fixed 64-bit mix of `(stream, index)`.
fn hash01(stream: u64, index: u64) -> f64 {
    let mut z = stream.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index.wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Daily weather spells: a value per day that persists for 2-4 days before redrawing.
fn spells(stream: u64, days: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(days);
    let mut k = 0u64;
    while out.len() < days {
        let len = 2 + (hash01(stream, 2 * k) * 3.0) as usize;
        let level = lo + (hi - lo) * hash01(stream, 2 * k + 1);
        for _ in 0..len {
            out.push(level);
        }
        k += 1;
    }
    out.truncate(days);
    out
}

fn smooth(hourly_day_values: &[f64], hours: usize) -> Vec<f64> {
    // Linear interpolation between day midpoints.
    (0..hours)
        .map(|h| {
            let x = h as f64 / 24.0 - 0.5;
            let d0 = x.floor().max(0.0) as usize;
            let d1 = (d0 + 1).min(hourly_day_values.len() - 1);
            let w = (x - d0 as f64).clamp(0.0, 1.0);
            hourly_day_values[d0] * (1.0 - w) + hourly_day_values[d1] * w
        })
        .collect()
}

/// Solar availability: a bell between 06:00 and 19:00 scaled by daily clearness.
fn solar_shape(stream: u64, hours: usize, season: bool) -> Vec<f64> {
    let days = hours.div_ceil(24);
    let clear = spells(stream, days, 0.2, 1.0);
    (0..hours)
        .map(|h| {
            let hod = (h % 24) as f64 + 0.5;
            let day = h / 24;
            let amp = if season { 0.8 + 0.2 * (2.0 * PI * (day as f64 - 172.0) / 366.0).cos() } else { 1.0 };
            let bell = if (6.0..19.0).contains(&hod) { (PI * (hod - 6.0) / 13.0).sin().powf(1.5) } else { 0.0 };
            let flicker = 0.9 + 0.1 * hash01(stream ^ 0xabc, h as u64);
            round4((bell * clear[day] * amp * flicker).clamp(0.0, 1.0))
        })
        .collect()
}

/// Wind availability: multi-day spells with a mild night bias and hourly noise.
fn wind_shape(stream: u64, hours: usize) -> Vec<f64> {
    let days = hours.div_ceil(24);
    let level = smooth(&spells(stream, days, 0.05, 0.85), hours);
    (0..hours)
        .map(|h| {
            let hod = (h % 24) as f64;
            let diurnal = 0.08 * (2.0 * PI * (hod - 3.0) / 24.0).cos();
            let noise = 0.12 * (hash01(stream ^ 0x5eed, h as u64) - 0.5);
            round4((level[h] + diurnal + noise).clamp(0.0, 1.0))
        })
        .collect()
}

/// Load in MW: morning shoulder, evening peak, weekend dip and day-to-day drift.
fn load_shape(stream: u64, hours: usize, base: f64, season: bool) -> Vec<f64> {
    let days = hours.div_ceil(24);
    let drift = spells(stream, days, 0.92, 1.08);
    (0..hours)
        .map(|h| {
            let hod = (h % 24) as f64;
            let day = h / 24;
            let morning = 0.12 * (-((hod - 8.0) / 2.0).powi(2)).exp();
            let evening = 0.40 * (-((hod - 19.0) / 2.2).powi(2)).exp();
            let night = -0.10 * (-((hod - 3.0) / 3.0).powi(2)).exp();
            let weekend = if day % 7 >= 5 { 0.93 } else { 1.0 };
            let seasonal =
                if season { 1.0 + 0.12 * (2.0 * PI * (day as f64 - 200.0) / 366.0).cos() } else { 1.0 };
            round4(base * (1.0 + morning + evening + night) * weekend * drift[day] * seasonal)
        })
        .collect()
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn bus(id: &str, reference: bool) -> Bus {
    Bus { id: id.into(), angle_min: -0.6, angle_max: 0.6, is_reference: reference }
}

fn line(id: &str, a: &str, b: &str, susceptance: f64, limit: f64) -> TransmissionLine {
    TransmissionLine {
        id: id.into(),
        from_bus: a.into(),
        to_bus: b.into(),
        susceptance,
        flow_min: -limit,
        flow_max: limit,
    }
}

#[allow(clippy::too_many_arguments)]
fn thermal(
    id: &str,
    bus: &str,
    p_min: f64,
    p_max: f64,
    ramp: f64,
    fuel: f64,
    start: f64,
    stop: f64,
    initial_output: f64,
) -> ThermalGenerator {
    ThermalGenerator {
        id: id.into(),
        bus: bus.into(),
        p_min,
        p_max,
        ramp_up: ramp,
        ramp_down: ramp,
        fuel_cost: fuel,
        start_cost: start,
        stop_cost: stop,
        initial_online: initial_output > 0.0,
        initial_output,
    }
}

fn storage(id: &str, bus: &str, power: f64, duration: f64, round_trip: f64, class: DurationClass) -> StorageDevice {
    let eff = round_trip.sqrt();
    let soc_max = power * duration;
    StorageDevice {
        id: id.into(),
        bus: bus.into(),
        charge_max: power,
        discharge_max: power,
        soc_min: 0.0,
        soc_max,
        eff_charge: eff,
        eff_discharge: eff,
        self_discharge: 0.0,
        initial_soc: 0.5 * soc_max,
        duration_class: class,
    }
}

fn reserve_rules() -> Vec<ReserveProduct> {
    vec![
        ReserveProduct {
            id: "reg_up".into(),
            kind: ReserveKind::RegulationUp,
            requirement: Requirement::Rule {
                load_fraction: 0.05,
                wind_forecast_fraction: 0.0,
                solar_forecast_fraction: 0.0,
            },
        },
        ReserveProduct {
            id: "spin_up".into(),
            kind: ReserveKind::SpinUp,
            requirement: Requirement::Rule {
                load_fraction: 0.05,
                wind_forecast_fraction: 0.10,
                solar_forecast_fraction: 0.04,
            },
        },
    ]
}

fn mini3(profile: Profile) -> PowerSystem {
    let hours = 336;
    let (solar_cap, wind_cap) = match profile {
        Profile::SolarDriven => (180.0, 50.0),
        Profile::WindDriven => (50.0, 190.0),
    };
    let total = load_shape(11, hours, 100.0, false);
    let mut loads = BTreeMap::new();
    loads.insert("B2".to_string(), total.iter().map(|l| round4(0.4 * l)).collect());
    loads.insert("B3".to_string(), total.iter().map(|l| round4(0.6 * l)).collect());
    PowerSystem {
        buses: vec![bus("B1", true), bus("B2", false), bus("B3", false)],
        lines: vec![
            line("L12", "B1", "B2", 10.0, 150.0),
            line("L23", "B2", "B3", 10.0, 150.0),
            line("L13", "B1", "B3", 8.0, 70.0),
        ],
        thermal: vec![
            thermal("G_base", "B1", 30.0, 90.0, 40.0, 22.0, 1500.0, 100.0, 70.0),
            thermal("G_peak", "B2", 10.0, 90.0, 90.0, 85.0, 300.0, 0.0, 0.0),
        ],
        vre: vec![
            VreGenerator {
                id: "PV1".into(),
                bus: "B1".into(),
                kind: VreKind::Solar,
                capacity: solar_cap,
                availability: solar_shape(21, hours, false),
                forecast: None,
            },
            VreGenerator {
                id: "W1".into(),
                bus: "B2".into(),
                kind: VreKind::Wind,
                capacity: wind_cap,
                availability: wind_shape(31, hours),
                forecast: None,
            },
        ],
        storage: vec![
            storage("BESS4h", "B3", 25.0, 4.0, 0.80, DurationClass::Short),
            storage("LDES24h", "B2", 40.0, 24.0, 0.65, DurationClass::Long),
        ],
        reserves: reserve_rules(),
        loads,
        horizon_hours: hours,
        base_power: 100.0,
    }
}

fn pjm5like(profile: Profile) -> PowerSystem {
    let hours = 8760;
    let (solar_scale, wind_scale) = match profile {
        Profile::SolarDriven => (1.0, 0.3),
        Profile::WindDriven => (0.3, 1.0),
    };
    let mut loads = BTreeMap::new();
    loads.insert("B".to_string(), load_shape(101, hours, 240.0, true));
    loads.insert("C".to_string(), load_shape(102, hours, 240.0, true));
    loads.insert("D".to_string(), load_shape(103, hours, 320.0, true));
    PowerSystem {
        buses: vec![bus("A", false), bus("B", false), bus("C", false), bus("D", false), bus("E", true)],
        lines: vec![
            line("AB", "A", "B", 35.0, 400.0),
            line("AD", "A", "D", 32.0, 300.0),
            line("AE", "A", "E", 100.0, 400.0),
            line("BC", "B", "C", 92.0, 300.0),
            line("CD", "C", "D", 34.0, 300.0),
            line("DE", "D", "E", 34.0, 240.0),
        ],
        thermal: vec![
            thermal("Alta", "A", 10.0, 40.0, 40.0, 14.0, 200.0, 0.0, 20.0),
            thermal("ParkCity", "A", 40.0, 170.0, 80.0, 15.0, 1500.0, 0.0, 100.0),
            thermal("Solitude", "C", 120.0, 420.0, 150.0, 30.0, 6000.0, 500.0, 250.0),
            thermal("Sundance", "D", 40.0, 200.0, 200.0, 40.0, 1000.0, 0.0, 0.0),
            thermal("Brighton", "E", 150.0, 500.0, 120.0, 10.0, 9000.0, 1000.0, 300.0),
        ],
        vre: vec![
            VreGenerator {
                id: "PV_B".into(),
                bus: "B".into(),
                kind: VreKind::Solar,
                capacity: 350.0 * solar_scale,
                availability: solar_shape(201, hours, true),
                forecast: None,
            },
            VreGenerator {
                id: "PV_C".into(),
                bus: "C".into(),
                kind: VreKind::Solar,
                capacity: 250.0 * solar_scale,
                availability: solar_shape(202, hours, true),
                forecast: None,
            },
            VreGenerator {
                id: "Wind_E".into(),
                bus: "E".into(),
                kind: VreKind::Wind,
                capacity: 500.0 * wind_scale,
                availability: wind_shape(203, hours),
                forecast: None,
            },
        ],
        storage: vec![
            storage("BESS_D", "D", 60.0, 4.0, 0.80, DurationClass::Short),
            storage("LDES_B", "B", 80.0, 10.0, 0.65, DurationClass::Long),
        ],
        reserves: reserve_rules(),
        loads,
        horizon_hours: hours,
        base_power: 100.0,
    }
}
