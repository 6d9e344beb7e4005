//! Grid data model.
//!
//! Hours are 0-based everywhere in the API (`0..horizon_hours`); files and
//! reports use 1-based hour labels.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Voltage angle bounds, radians.
    pub angle_min: f64,
    pub angle_max: f64,
    #[serde(default)]
    pub is_reference: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Per-unit on the system base; flow = base_power * susceptance * (angle_from - angle_to).
    pub susceptance: f64,
    pub flow_min: f64,
    pub flow_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalGenerator {
    pub id: String,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Fuel plus variable O&M, per MWh.
    pub fuel_cost: f64,
    pub start_cost: f64,
    pub stop_cost: f64,
    pub initial_online: bool,
    pub initial_output: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VreKind {
    Solar,
    Wind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VreGenerator {
    pub id: String,
    pub bus: String,
    pub kind: VreKind,
    pub capacity: f64,
    /// Actual hourly availability as a fraction of capacity.
    pub availability: Vec<f64>,
    /// Day-ahead forecast fraction; actuals are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<Vec<f64>>,
}

impl VreGenerator {
    pub fn available_mw(&self, hour: usize) -> f64 {
        self.capacity * self.availability[hour]
    }

    pub fn forecast_mw(&self, hour: usize) -> f64 {
        match &self.forecast {
            Some(f) => self.capacity * f[hour],
            None => self.available_mw(hour),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationClass {
    Short,
    Long,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageDevice {
    pub id: String,
    pub bus: String,
    pub charge_max: f64,
    pub discharge_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    /// Fraction of stored energy lost per hour.
    pub self_discharge: f64,
    pub initial_soc: f64,
    pub duration_class: DurationClass,
}

impl StorageDevice {
    pub fn round_trip(&self) -> f64 {
        self.eff_charge * self.eff_discharge
    }

    /// Hours of full-power discharge from a full store.
    pub fn duration_hours(&self) -> f64 {
        self.soc_max / self.discharge_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReserveKind {
    RegulationUp,
    SpinUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Requirement {
    Series(Vec<f64>),
    Rule { load_fraction: f64, wind_forecast_fraction: f64, solar_forecast_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReserveProduct {
    pub id: String,
    pub kind: ReserveKind,
    pub requirement: Requirement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSystem {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<TransmissionLine>,
    #[serde(default)]
    pub thermal: Vec<ThermalGenerator>,
    #[serde(default)]
    pub vre: Vec<VreGenerator>,
    #[serde(default)]
    pub storage: Vec<StorageDevice>,
    #[serde(default)]
    pub reserves: Vec<ReserveProduct>,
    /// Hourly MW demand keyed by bus id.
    pub loads: BTreeMap<String, Vec<f64>>,
    pub horizon_hours: usize,
    pub base_power: f64,
}

impl PowerSystem {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn storage_index(&self, id: &str) -> Option<usize> {
        self.storage.iter().position(|s| s.id == id)
    }

    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_reference)
    }

    pub fn total_load(&self, hour: usize) -> f64 {
        self.loads.values().map(|s| s[hour]).sum()
    }

    pub fn bus_load(&self, bus: usize, hour: usize) -> f64 {
        self.loads.get(&self.buses[bus].id).map_or(0.0, |s| s[hour])
    }

    fn check_range(&self, hours: &Range<usize>) -> Result<()> {
        if hours.start > hours.end || hours.end > self.horizon_hours {
            return Err(Error::Range(format!(
                "{}..{} outside 0..{}",
                hours.start, hours.end, self.horizon_hours
            )));
        }
        Ok(())
    }

    /// Load minus forecast VRE output, per hour of `hours`.
    pub fn net_load(&self, hours: Range<usize>) -> Result<Vec<f64>> {
        self.check_range(&hours)?;
        Ok(hours
            .map(|h| self.total_load(h) - self.vre.iter().map(|v| v.forecast_mw(h)).sum::<f64>())
            .collect())
    }

    pub fn reserve_requirement(&self, product: &ReserveProduct, hour: usize) -> Result<f64> {
        if hour >= self.horizon_hours {
            return Err(Error::Range(format!("hour {hour} outside 0..{}", self.horizon_hours)));
        }
        Ok(match &product.requirement {
            Requirement::Series(s) => s[hour],
            Requirement::Rule { load_fraction, wind_forecast_fraction, solar_forecast_fraction } => {
                let mut wind = 0.0;
                let mut solar = 0.0;
                for v in &self.vre {
                    match v.kind {
                        VreKind::Wind => wind += v.forecast_mw(hour),
                        VreKind::Solar => solar += v.forecast_mw(hour),
                    }
                }
                load_fraction * self.total_load(hour) + wind_forecast_fraction * wind + solar_forecast_fraction * solar
            }
        })
    }

    /// The first `hours` hours of the system.
    pub fn with_horizon(&self, hours: usize) -> Result<PowerSystem> {
        if hours == 0 || hours > self.horizon_hours {
            return Err(Error::Range(format!("horizon {hours} outside 1..={}", self.horizon_hours)));
        }
        let mut out = self.clone();
        out.horizon_hours = hours;
        for s in out.loads.values_mut() {
            s.truncate(hours);
        }
        for v in &mut out.vre {
            v.availability.truncate(hours);
            if let Some(f) = &mut v.forecast {
                f.truncate(hours);
            }
        }
        for r in &mut out.reserves {
            if let Requirement::Series(s) = &mut r.requirement {
                s.truncate(hours);
            }
        }
        Ok(out)
    }

    /// Short stable digest of the system contents, used to refuse comparisons across systems.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("system serializes");
        // FNV-1a, 64 bit
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn finite_all(vals: &[(&str, f64)], entity: &str, out: &mut Vec<Violation>) -> bool {
    let mut ok = true;
    for (name, v) in vals {
        if !v.is_finite() {
            out.push(Violation::new(entity, *name, "must be finite"));
            ok = false;
        }
    }
    ok
}

fn check_series(entity: &str, field: &str, s: &[f64], horizon: usize, lo: f64, hi: f64, out: &mut Vec<Violation>) {
    if s.len() != horizon {
        out.push(Violation::new(entity, field, format!("length {} differs from horizon {}", s.len(), horizon)));
    }
    if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= lo && **v <= hi)) {
        out.push(Violation::new(entity, field, format!("value {v} at hour {} outside [{lo}, {hi}]", i + 1)));
    }
}

/// Lists every broken invariant; an empty list means the system is usable.
pub fn validate_system(sys: &PowerSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let h = sys.horizon_hours;
    if h == 0 {
        out.push(Violation::new("system", "horizon_hours", "must be at least 1"));
    }
    if !(sys.base_power.is_finite() && sys.base_power > 0.0) {
        out.push(Violation::new("system", "base_power", "must be positive"));
    }
    let mut ids = BTreeSet::new();
    let mut dup = |kind: &str, id: &str, out: &mut Vec<Violation>| {
        if !ids.insert(format!("{kind}:{id}")) {
            out.push(Violation::new(id, "id", format!("duplicate {kind} id")));
        }
    };
    let buses: BTreeSet<&str> = sys.buses.iter().map(|b| b.id.as_str()).collect();
    let unknown = |bus: &str| format!("unknown bus {bus}");

    if sys.buses.is_empty() {
        out.push(Violation::new("system", "buses", "at least one bus is required"));
    }
    for b in &sys.buses {
        dup("bus", &b.id, &mut out);
        if finite_all(&[("angle_min", b.angle_min), ("angle_max", b.angle_max)], &b.id, &mut out)
            && !(b.angle_min <= 0.0 && 0.0 <= b.angle_max)
        {
            out.push(Violation::new(&b.id, "angle_min/angle_max", "require angle_min <= 0 <= angle_max"));
        }
    }
    match sys.buses.iter().filter(|b| b.is_reference).count() {
        1 => {}
        0 if !sys.buses.is_empty() => out.push(Violation::new("system", "is_reference", "no reference bus")),
        0 => {}
        _ => out.push(Violation::new("system", "is_reference", "multiple reference buses")),
    }
    for l in &sys.lines {
        dup("line", &l.id, &mut out);
        for (field, bus) in [("from_bus", &l.from_bus), ("to_bus", &l.to_bus)] {
            if !buses.contains(bus.as_str()) {
                out.push(Violation::new(&l.id, field, unknown(bus)));
            }
        }
        if l.from_bus == l.to_bus {
            out.push(Violation::new(&l.id, "to_bus", "line must join two different buses"));
        }
        let vals = [("susceptance", l.susceptance), ("flow_min", l.flow_min), ("flow_max", l.flow_max)];
        if finite_all(&vals, &l.id, &mut out) {
            if !(l.flow_min <= 0.0 && 0.0 <= l.flow_max) {
                out.push(Violation::new(&l.id, "flow_min/flow_max", "require flow_min <= 0 <= flow_max"));
            }
            if l.susceptance <= 0.0 {
                out.push(Violation::new(&l.id, "susceptance", "must be positive"));
            }
        }
    }
    for g in &sys.thermal {
        dup("thermal", &g.id, &mut out);
        if !buses.contains(g.bus.as_str()) {
            out.push(Violation::new(&g.id, "bus", unknown(&g.bus)));
        }
        let vals = [
            ("p_min", g.p_min),
            ("p_max", g.p_max),
            ("ramp_up", g.ramp_up),
            ("ramp_down", g.ramp_down),
            ("fuel_cost", g.fuel_cost),
            ("start_cost", g.start_cost),
            ("stop_cost", g.stop_cost),
            ("initial_output", g.initial_output),
        ];
        if !finite_all(&vals, &g.id, &mut out) {
            continue;
        }
        if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
            out.push(Violation::new(&g.id, "p_min/p_max", "require 0 <= p_min <= p_max"));
        }
        if g.ramp_up < 0.0 || g.ramp_down < 0.0 {
            out.push(Violation::new(&g.id, "ramp_up/ramp_down", "ramp limits must be non-negative"));
        }
        if g.fuel_cost < 0.0 || g.start_cost < 0.0 || g.stop_cost < 0.0 {
            out.push(Violation::new(&g.id, "costs", "costs must be non-negative"));
        }
        if !g.initial_online && g.initial_output != 0.0 {
            out.push(Violation::new(&g.id, "initial_output", "offline unit must have zero initial output"));
        }
        if g.initial_output < 0.0 || g.initial_output > g.p_max {
            out.push(Violation::new(&g.id, "initial_output", "must lie within [0, p_max]"));
        }
    }
    for v in &sys.vre {
        dup("vre", &v.id, &mut out);
        if !buses.contains(v.bus.as_str()) {
            out.push(Violation::new(&v.id, "bus", unknown(&v.bus)));
        }
        if !(v.capacity.is_finite() && v.capacity >= 0.0) {
            out.push(Violation::new(&v.id, "capacity", "must be non-negative"));
        }
        check_series(&v.id, "availability", &v.availability, h, 0.0, 1.0, &mut out);
        if let Some(f) = &v.forecast {
            check_series(&v.id, "forecast", f, h, 0.0, 1.0, &mut out);
        }
    }
    for s in &sys.storage {
        dup("storage", &s.id, &mut out);
        if !buses.contains(s.bus.as_str()) {
            out.push(Violation::new(&s.id, "bus", unknown(&s.bus)));
        }
        let vals = [
            ("charge_max", s.charge_max),
            ("discharge_max", s.discharge_max),
            ("soc_min", s.soc_min),
            ("soc_max", s.soc_max),
            ("eff_charge", s.eff_charge),
            ("eff_discharge", s.eff_discharge),
            ("self_discharge", s.self_discharge),
            ("initial_soc", s.initial_soc),
        ];
        if !finite_all(&vals, &s.id, &mut out) {
            continue;
        }
        if s.soc_min > s.soc_max {
            out.push(Violation::new(
                &s.id,
                "soc_min/soc_max",
                format!("soc_min {} exceeds soc_max {}", s.soc_min, s.soc_max),
            ));
        } else if !(0.0 <= s.soc_min && s.soc_min <= s.initial_soc && s.initial_soc <= s.soc_max) {
            out.push(Violation::new(&s.id, "initial_soc", "require 0 <= soc_min <= initial_soc <= soc_max"));
        }
        for (field, e) in [("eff_charge", s.eff_charge), ("eff_discharge", s.eff_discharge)] {
            if !(e > 0.0 && e <= 1.0) {
                out.push(Violation::new(&s.id, field, "efficiency must lie in (0, 1]"));
            }
        }
        if !(0.0 <= s.self_discharge && s.self_discharge < 1.0) {
            out.push(Violation::new(&s.id, "self_discharge", "must lie in [0, 1)"));
        }
        if s.charge_max <= 0.0 {
            out.push(Violation::new(&s.id, "charge_max", "must be positive"));
        }
        if s.discharge_max <= 0.0 {
            out.push(Violation::new(&s.id, "discharge_max", "must be positive"));
        }
    }
    for r in &sys.reserves {
        dup("reserve", &r.id, &mut out);
        match &r.requirement {
            Requirement::Series(s) => check_series(&r.id, "requirement", s, h, 0.0, f64::INFINITY, &mut out),
            Requirement::Rule { load_fraction, wind_forecast_fraction, solar_forecast_fraction } => {
                for (field, f) in [
                    ("load_fraction", load_fraction),
                    ("wind_forecast_fraction", wind_forecast_fraction),
                    ("solar_forecast_fraction", solar_forecast_fraction),
                ] {
                    if !(f.is_finite() && *f >= 0.0) {
                        out.push(Violation::new(&r.id, field, "must be non-negative"));
                    }
                }
            }
        }
    }
    for (bus, series) in &sys.loads {
        if !buses.contains(bus.as_str()) {
            out.push(Violation::new(format!("loads.{bus}"), "bus", unknown(bus)));
        }
        check_series(&format!("loads.{bus}"), "series", series, h, 0.0, f64::INFINITY, &mut out);
    }
    if !sys.lines.is_empty() && !connected(sys) {
        out.push(Violation::new("system", "lines", "network graph is not connected"));
    }
    out
}

fn connected(sys: &PowerSystem) -> bool {
    let n = sys.buses.len();
    if n == 0 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for l in &sys.lines {
        if let (Some(a), Some(b)) = (sys.bus_index(&l.from_bus), sys.bus_index(&l.to_bus)) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
