//! Evaluation quantities computed from committed schedules.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::AnnualResult;
use crate::error::{Error, Result};
use crate::system::{DurationClass, PowerSystem};
use crate::ucd::DispatchSchedule;

/// Realized costs; steering terms (energy-value credit, target penalties) are excluded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fuel: f64,
    pub start: f64,
    pub stop: f64,
    pub unserved_penalty: f64,
    pub reserve_penalty: f64,
    pub total: f64,
}

pub fn production_cost_breakdown(sys: &PowerSystem, sched: &DispatchSchedule) -> CostBreakdown {
    let b = sched.costs(sys, 0..sched.hours);
    CostBreakdown {
        fuel: b.fuel,
        start: b.start,
        stop: b.stop,
        unserved_penalty: b.unserved_penalty,
        reserve_penalty: b.reserve_penalty,
        total: b.fuel + b.start + b.stop + b.unserved_penalty + b.reserve_penalty,
    }
}

/// Solver-side steering summed over all windows (look-ahead included).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Steering {
    pub ev_rebate: f64,
    pub evt_penalty: f64,
}

/// Indices (0-based) of the `n` largest values; ties go to the earlier hour.
pub fn top_hours(values: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// System hours (0-based) with the largest net load.
pub fn top_net_load_hours(sys: &PowerSystem, n: usize) -> Result<Vec<usize>> {
    top_net_load_hours_in(sys, 0, sys.horizon_hours, n)
}

/// As [`top_net_load_hours`], restricted to `start..start + hours`.
pub fn top_net_load_hours_in(sys: &PowerSystem, start: usize, hours: usize, n: usize) -> Result<Vec<usize>> {
    if n > hours {
        return Err(Error::Range(format!("asked for {n} peak hours out of {hours}")));
    }
    let net = sys.net_load(start..start + hours)?;
    Ok(top_hours(&net, n).into_iter().map(|t| t + start).collect())
}

/// `100 * sum(pd) / (n * pd_max)` over the given hours.
pub fn standard_cc(discharge: &[f64], pd_max: f64) -> f64 {
    if discharge.is_empty() {
        return 0.0;
    }
    100.0 * discharge.iter().sum::<f64>() / (discharge.len() as f64 * pd_max)
}

/// `100 * sum(pd + min(pd_max - pd, eff_d * soc)) / (n * pd_max)`, hours scored independently.
pub fn soc_aware_cc(discharge: &[f64], soc: &[f64], eff_discharge: f64, pd_max: f64) -> f64 {
    if discharge.is_empty() {
        return 0.0;
    }
    let sum: f64 = discharge
        .iter()
        .zip(soc)
        .map(|(&pd, &e)| pd + (pd_max - pd).min(eff_discharge * e).max(0.0))
        .sum();
    100.0 * sum / (discharge.len() as f64 * pd_max)
}

fn peak_slice(sys: &PowerSystem, sched: &DispatchSchedule, n: usize) -> Result<Vec<usize>> {
    Ok(top_net_load_hours_in(sys, sched.start_hour, sched.hours, n.min(sched.hours))?
        .into_iter()
        .map(|h| h - sched.start_hour)
        .collect())
}

fn device(sys: &PowerSystem, id: &str) -> Result<usize> {
    sys.storage_index(id).ok_or_else(|| Error::UnknownDevice(id.to_string()))
}

pub fn standard_capacity_credit(sys: &PowerSystem, sched: &DispatchSchedule, id: &str, n: usize) -> Result<f64> {
    let s = device(sys, id)?;
    let hours = peak_slice(sys, sched, n)?;
    let pd: Vec<f64> = hours.iter().map(|&t| sched.storage[s].discharge[t]).collect();
    Ok(standard_cc(&pd, sys.storage[s].discharge_max))
}

pub fn soc_aware_capacity_credit(sys: &PowerSystem, sched: &DispatchSchedule, id: &str, n: usize) -> Result<f64> {
    let s = device(sys, id)?;
    let dev = &sys.storage[s];
    let hours = peak_slice(sys, sched, n)?;
    let pd: Vec<f64> = hours.iter().map(|&t| sched.storage[s].discharge[t]).collect();
    let soc: Vec<f64> = hours.iter().map(|&t| sched.storage[s].soc[t]).collect();
    Ok(soc_aware_cc(&pd, &soc, dev.eff_discharge, dev.discharge_max))
}

/// Energy drawn from the store divided by its usable energy range.
pub fn equivalent_cycles(sys: &PowerSystem, sched: &DispatchSchedule, id: &str) -> Result<f64> {
    let s = device(sys, id)?;
    let dev = &sys.storage[s];
    let range = dev.soc_max - dev.soc_min;
    if range <= 0.0 {
        return Err(Error::DegenerateCapacity(id.to_string()));
    }
    let drawn: f64 = sched.storage[s].discharge.iter().map(|pd| pd / dev.eff_discharge).sum();
    Ok(drawn / range)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curtailment {
    pub available: f64,
    pub dispatched: f64,
    pub curtailed: f64,
    pub percent: f64,
}

pub fn curtailment(sched: &DispatchSchedule) -> Curtailment {
    let available: f64 = sched.vre.iter().flat_map(|v| &v.available).fold(0.0, |a, b| a + b);
    let dispatched: f64 = sched.vre.iter().flat_map(|v| &v.dispatch).fold(0.0, |a, b| a + b);
    let curtailed = (available - dispatched).max(0.0);
    let percent = if available > 0.0 { 100.0 * curtailed / available } else { 0.0 };
    Curtailment { available, dispatched, curtailed, percent }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClass {
    Thermal,
    ShortStorage,
    LongStorage,
}

impl DeviceClass {
    pub const ALL: [DeviceClass; 3] = [DeviceClass::Thermal, DeviceClass::ShortStorage, DeviceClass::LongStorage];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::Thermal => "thermal",
            DeviceClass::ShortStorage => "short_storage",
            DeviceClass::LongStorage => "long_storage",
        }
    }
}

/// Share of the total reserve requirement in the top-`n` net-load hours met by `class`.
pub fn reserve_share_peak(sys: &PowerSystem, sched: &DispatchSchedule, class: DeviceClass, n: usize) -> Result<f64> {
    let hours = peak_slice(sys, sched, n)?;
    let mut provided = 0.0;
    let mut required = 0.0;
    for rt in &sched.reserves {
        for &t in &hours {
            required += rt.requirement[t];
            provided += match class {
                DeviceClass::Thermal => rt.thermal.iter().map(|r| r[t]).sum::<f64>(),
                DeviceClass::ShortStorage | DeviceClass::LongStorage => {
                    let want = if class == DeviceClass::LongStorage { DurationClass::Long } else { DurationClass::Short };
                    sys.storage
                        .iter()
                        .zip(&rt.storage)
                        .filter(|(d, _)| d.duration_class == want)
                        .map(|(_, r)| r[t])
                        .sum::<f64>()
                }
            };
        }
    }
    Ok(if required > 0.0 { 100.0 * provided / required } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageMetrics {
    pub device: String,
    pub duration_class: DurationClass,
    pub standard_cc: f64,
    pub soc_aware_cc: f64,
    pub equivalent_cycles: f64,
    pub discharged_mwh: f64,
}

/// Run statistics that vary between identical runs; kept out of `metrics.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_wall_s: f64,
    pub mean_window_s: f64,
    pub max_window_s: f64,
    pub mt_wall_s: Option<f64>,
    /// Estimate from the process high-water mark.
    pub peak_memory_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    pub fingerprint: String,
    pub start_hour: usize,
    pub hours: usize,
    pub windows: usize,
    pub peak_hours: Vec<usize>,
    pub production_cost: CostBreakdown,
    pub steering: Steering,
    pub storage: Vec<StorageMetrics>,
    pub vre: Curtailment,
    pub reserve_share_peak: BTreeMap<String, f64>,
    pub unserved_mwh: f64,
    pub reserve_shortfall_mwh: f64,
    #[serde(skip)]
    pub timing: Timing,
}

pub const PEAK_HOURS: usize = 10;

pub fn metrics_report(sys: &PowerSystem, result: &AnnualResult) -> Result<MetricsReport> {
    if sys.fingerprint() != result.fingerprint {
        return Err(Error::FingerprintMismatch(sys.fingerprint(), result.fingerprint.clone()));
    }
    let sched = &result.schedule;
    let n = PEAK_HOURS.min(sched.hours);
    let peak = peak_slice(sys, sched, n)?;
    let mut storage = Vec::new();
    for (s, dev) in sys.storage.iter().enumerate() {
        storage.push(StorageMetrics {
            device: dev.id.clone(),
            duration_class: dev.duration_class,
            standard_cc: standard_capacity_credit(sys, sched, &dev.id, n)?,
            soc_aware_cc: soc_aware_capacity_credit(sys, sched, &dev.id, n)?,
            equivalent_cycles: equivalent_cycles(sys, sched, &dev.id).unwrap_or(0.0),
            discharged_mwh: sched.storage[s].discharge.iter().fold(0.0, |a, b| a + b),
        });
    }
    let mut shares = BTreeMap::new();
    if !sched.reserves.is_empty() {
        for class in DeviceClass::ALL {
            shares.insert(class.as_str().to_string(), reserve_share_peak(sys, sched, class, n)?);
        }
    }
    let steering = Steering {
        ev_rebate: result.windows.iter().map(|w| w.ev_rebate).fold(0.0, |a, b| a + b),
        evt_penalty: result.windows.iter().map(|w| w.evt_penalty).fold(0.0, |a, b| a + b),
    };
    Ok(MetricsReport {
        strategy: result.strategy.label.clone(),
        fingerprint: result.fingerprint.clone(),
        start_hour: sched.start_hour,
        hours: sched.hours,
        windows: result.windows.len(),
        peak_hours: peak.iter().map(|t| t + sched.start_hour + 1).collect(),
        production_cost: production_cost_breakdown(sys, sched),
        steering,
        storage,
        vre: curtailment(sched),
        reserve_share_peak: shares,
        unserved_mwh: sched.unserved.iter().flatten().fold(0.0, |a, b| a + b),
        reserve_shortfall_mwh: sched.reserves.iter().flat_map(|r| &r.shortfall).fold(0.0, |a, b| a + b),
        timing: Timing {
            total_wall_s: result.total_wall_time,
            mean_window_s: result.mean_window_time(),
            max_window_s: result.windows.iter().map(|w| w.wall_time).fold(0.0, f64::max),
            mt_wall_s: result.mt_wall_time,
            peak_memory_bytes: result.peak_memory_bytes,
        },
    })
}

impl MetricsReport {
    /// Pretty JSON without timing, so identical runs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "strategy".to_string(),
            "hours".into(),
            "windows".into(),
            "fuel".into(),
            "start".into(),
            "stop".into(),
            "unserved_penalty".into(),
            "reserve_penalty".into(),
            "total_cost".into(),
            "unserved_mwh".into(),
            "vre_available_mwh".into(),
            "vre_curtailed_mwh".into(),
            "curtailment_pct".into(),
        ];
        for s in &self.storage {
            for f in ["standard_cc", "soc_aware_cc", "equivalent_cycles"] {
                cols.push(format!("{}_{f}", s.device));
            }
        }
        for k in self.reserve_share_peak.keys() {
            cols.push(format!("reserve_share_{k}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let c = &self.production_cost;
        let mut vals = vec![
            self.strategy.clone(),
            self.hours.to_string(),
            self.windows.to_string(),
            c.fuel.to_string(),
            c.start.to_string(),
            c.stop.to_string(),
            c.unserved_penalty.to_string(),
            c.reserve_penalty.to_string(),
            c.total.to_string(),
            self.unserved_mwh.to_string(),
            self.vre.available.to_string(),
            self.vre.curtailed.to_string(),
            self.vre.percent.to_string(),
        ];
        for s in &self.storage {
            vals.push(s.standard_cc.to_string());
            vals.push(s.soc_aware_cc.to_string());
            vals.push(s.equivalent_cycles.to_string());
        }
        for v in self.reserve_share_peak.values() {
            vals.push(v.to_string());
        }
        vals.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditDelta {
    pub device: String,
    pub standard_cc: f64,
    pub soc_aware_cc: f64,
    pub standard_cc_change: f64,
    pub soc_aware_cc_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub baseline_cost: f64,
    pub candidate_cost: f64,
    pub reduction_pct: f64,
    pub curtailment_change_pct: f64,
    pub unserved_change_mwh: f64,
    pub credits: Vec<CreditDelta>,
    /// Candidate wall time over baseline wall time; absent when either is unmeasured.
    pub normalized_cpu: Option<f64>,
}

pub fn compare_runs(baseline: &MetricsReport, candidate: &MetricsReport) -> Result<Comparison> {
    if baseline.fingerprint != candidate.fingerprint {
        return Err(Error::FingerprintMismatch(baseline.fingerprint.clone(), candidate.fingerprint.clone()));
    }
    let b = baseline.production_cost.total;
    let c = candidate.production_cost.total;
    let reduction_pct = if b != 0.0 { 100.0 * (b - c) / b } else { 0.0 };
    let credits = candidate
        .storage
        .iter()
        .map(|s| {
            let base = baseline.storage.iter().find(|x| x.device == s.device);
            CreditDelta {
                device: s.device.clone(),
                standard_cc: s.standard_cc,
                soc_aware_cc: s.soc_aware_cc,
                standard_cc_change: s.standard_cc - base.map_or(0.0, |x| x.standard_cc),
                soc_aware_cc_change: s.soc_aware_cc - base.map_or(0.0, |x| x.soc_aware_cc),
            }
        })
        .collect();
    let (tb, tc) = (baseline.timing.total_wall_s, candidate.timing.total_wall_s);
    Ok(Comparison {
        baseline: baseline.strategy.clone(),
        candidate: candidate.strategy.clone(),
        baseline_cost: b,
        candidate_cost: c,
        reduction_pct,
        curtailment_change_pct: candidate.vre.percent - baseline.vre.percent,
        unserved_change_mwh: candidate.unserved_mwh - baseline.unserved_mwh,
        credits,
        normalized_cpu: if tb > 0.0 && tc > 0.0 { Some(tc / tb) } else { None },
    })
}

/// One row per comparison; credit columns follow the first comparison's device order.
pub fn comparison_markdown(rows: &[Comparison]) -> String {
    let mut out = String::new();
    let devices: Vec<String> = rows.first().map(|r| r.credits.iter().map(|c| c.device.clone()).collect()).unwrap_or_default();
    out.push_str("| strategy | cost | reduction % |");
    for d in &devices {
        let _ = write!(out, " {d} CC % | {d} SOC-aware CC % |");
    }
    out.push_str(" curtailment change (pp) | normalized CPU |\n|---|---:|---:|");
    for _ in &devices {
        out.push_str("---:|---:|");
    }
    out.push_str("---:|---:|\n");
    for r in rows {
        let _ = write!(out, "| {} | {:.2} | {:.3} |", r.candidate, r.candidate_cost, r.reduction_pct);
        for d in &devices {
            match r.credits.iter().find(|c| &c.device == d) {
                Some(c) => {
                    let _ = write!(out, " {:.1} | {:.1} |", c.standard_cc, c.soc_aware_cc);
                }
                None => out.push_str(" - | - |"),
            }
        }
        let cpu = r.normalized_cpu.map_or("-".to_string(), |x| format!("{x:.2}"));
        let _ = writeln!(out, " {:.3} | {} |", r.curtailment_change_pct, cpu);
    }
    out
}
