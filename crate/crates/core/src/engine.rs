//! Rolling-horizon simulation under a named storage strategy.
//!
//! Windows start every 24 hours, keep 24 hours of decisions and discard the
//! look-ahead. The ideal strategies solve the whole horizon in one window.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ldes_milp::{solve_lp, solve_milp, SolverOptions, Status};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mt::{extract_daily_targets, run_mt, DailyTargets, MtOptions};
use crate::system::{DurationClass, PowerSystem};
use crate::ucd::{
    build_ucd, extract_schedule, BoundaryState, DispatchSchedule, EnergyValue, EvtMode, EvtSpec, FormulationOptions,
    HorizonSpec, DEFAULT_EVT_PENALTY,
};

pub const COMMIT_HOURS: usize = 24;
/// In-window hour (1-based) at which end-volume targets apply.
pub const EVT_HOUR: usize = 48;
/// In-window hours (1-based) whose stored energy earns the energy-value credit.
pub const EV_HOURS: [usize; 2] = [24, 48];
pub const WINDOW_TIME_LIMIT: f64 = 1000.0;
pub const IDEAL_TIME_LIMIT: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// The last window commits every remaining hour, so the schedule covers the horizon.
    #[default]
    Clamp,
    /// Only windows whose full look-ahead fits are solved.
    Truncate,
}

impl FromStr for TailMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(TailMode::Clamp),
            "truncate" => Ok(TailMode::Truncate),
            _ => Err(Error::Config(format!("unknown tail mode {s:?} (expected clamp or truncate)"))),
        }
    }
}

/// Window layout for a horizon of `hours`. Windows step by `commit`.
pub fn window_plan(hours: usize, commit: usize, lookahead: usize, tail: TailMode) -> Result<Vec<HorizonSpec>> {
    if commit == 0 {
        return Err(Error::Config("commit window must be at least one hour".into()));
    }
    let mut plan = Vec::new();
    let mut start = 0;
    match tail {
        TailMode::Clamp => {
            while start < hours {
                let remaining = hours - start;
                if remaining <= commit + lookahead {
                    plan.push(HorizonSpec::new(start, remaining, 0));
                    break;
                }
                plan.push(HorizonSpec::new(start, commit, lookahead));
                start += commit;
            }
        }
        TailMode::Truncate => {
            while start + commit + lookahead <= hours {
                plan.push(HorizonSpec::new(start, commit, lookahead));
                start += commit;
            }
            if plan.is_empty() {
                return Err(Error::Config(format!(
                    "look-ahead of {lookahead} h does not fit a {hours} h horizon without clamping"
                )));
            }
        }
    }
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "ID-LP")]
    IdLp,
    #[serde(rename = "TR")]
    Tr,
    #[serde(rename = "ELH")]
    Elh,
    #[serde(rename = "EVT-LA")]
    EvtLa,
    #[serde(rename = "EVT-LA-MT")]
    EvtLaMt,
    #[serde(rename = "EV")]
    Ev,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Id,
        StrategyKind::IdLp,
        StrategyKind::Tr,
        StrategyKind::Elh,
        StrategyKind::EvtLa,
        StrategyKind::EvtLaMt,
        StrategyKind::Ev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Id => "ID",
            StrategyKind::IdLp => "ID-LP",
            StrategyKind::Tr => "TR",
            StrategyKind::Elh => "ELH",
            StrategyKind::EvtLa => "EVT-LA",
            StrategyKind::EvtLaMt => "EVT-LA-MT",
            StrategyKind::Ev => "EV",
        }
    }

    pub fn is_ideal(self) -> bool {
        matches!(self, StrategyKind::Id | StrategyKind::IdLp)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Display name, e.g. `ELH-3d` or `EV-025`.
    pub label: String,
    pub lookahead_hours: usize,
    pub energy_value: Option<f64>,
    pub evt_fraction: Option<f64>,
    pub evt_mode: EvtMode,
    pub evt_penalty: f64,
    /// Devices that receive end-volume targets; empty means every long-duration device.
    pub target_devices: Vec<String>,
    pub per_window_time_limit: f64,
    pub ideal_time_limit: f64,
    /// Only used by the ideal strategies.
    pub cyclic_soc: bool,
    pub tail: TailMode,
}

fn valid_names() -> String {
    let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.as_str()).collect();
    format!("{} (shorthands: ELH-3d, ELH-1w, ELH-1m, EV-01, EV-025)", names.join(", "))
}

/// Builds a strategy from its base name and parameters:
/// `ELH` takes `days`, `EV` takes `value`, `EVT-LA` optionally takes `fraction`.
pub fn make_strategy(name: &str, params: &BTreeMap<String, f64>) -> Result<StrategySpec> {
    let kind = StrategyKind::ALL
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown strategy {name:?}; valid names: {}", valid_names())))?;
    let (required, optional): (&[&str], &[&str]) = match kind {
        StrategyKind::Elh => (&["days"], &[]),
        StrategyKind::Ev => (&["value"], &[]),
        StrategyKind::EvtLa => (&[], &["fraction"]),
        _ => (&[], &[]),
    };
    for r in required {
        if !params.contains_key(*r) {
            return Err(Error::Config(format!("strategy {kind} needs parameter {r:?}")));
        }
    }
    for k in params.keys() {
        if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            return Err(Error::Config(format!("strategy {kind} does not take parameter {k:?}")));
        }
    }
    let mut spec = StrategySpec {
        kind,
        label: kind.as_str().to_string(),
        lookahead_hours: COMMIT_HOURS,
        energy_value: None,
        evt_fraction: None,
        evt_mode: EvtMode::Soft,
        evt_penalty: DEFAULT_EVT_PENALTY,
        target_devices: Vec::new(),
        per_window_time_limit: WINDOW_TIME_LIMIT,
        ideal_time_limit: IDEAL_TIME_LIMIT,
        cyclic_soc: kind.is_ideal(),
        tail: TailMode::Clamp,
    };
    match kind {
        StrategyKind::Id | StrategyKind::IdLp => spec.lookahead_hours = 0,
        StrategyKind::Elh => {
            let days = params["days"];
            if !(days >= 1.0 && days.fract() == 0.0) {
                return Err(Error::Config(format!("ELH days must be a positive whole number, got {days}")));
            }
            let days = days as usize;
            spec.lookahead_hours = 24 * days;
            spec.label = match days {
                7 => "ELH-1w".into(),
                30 => "ELH-1m".into(),
                d => format!("ELH-{d}d"),
            };
        }
        StrategyKind::Ev => {
            let v = params["value"];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("energy value must be non-negative, got {v}")));
            }
            spec.energy_value = Some(v);
            spec.label = format!("EV-{}", format!("{v}").replace('.', ""));
        }
        StrategyKind::EvtLa => {
            let f = params.get("fraction").copied().unwrap_or(0.5);
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("target fraction must lie in [0, 1], got {f}")));
            }
            spec.evt_fraction = Some(f);
        }
        _ => {}
    }
    Ok(spec)
}

/// Parses a display name such as `TR`, `ELH-3d`, `ELH-1w`, `ELH-1m`, `EV-01` (0.1) or `EV-0.25`.
pub fn parse_strategy(label: &str) -> Result<StrategySpec> {
    let upper = label.to_ascii_uppercase();
    let mut params = BTreeMap::new();
    let base = if let Some(rest) = upper.strip_prefix("ELH-") {
        let days = match rest {
            "1W" => Some(7.0),
            "1M" => Some(30.0),
            r => r.strip_suffix('D').and_then(|d| d.parse::<f64>().ok()),
        };
        params.insert("days".to_string(), days.ok_or_else(|| Error::Config(format!("cannot read look-ahead in {label:?}")))?);
        "ELH"
    } else if let Some(rest) = upper.strip_prefix("EV-") {
        let value = if rest.contains('.') {
            rest.parse::<f64>().ok()
        } else if rest.len() > 1 && rest.starts_with('0') && rest.chars().all(|c| c.is_ascii_digit()) {
            format!("0.{}", &rest[1..]).parse::<f64>().ok()
        } else {
            rest.parse::<f64>().ok()
        };
        params.insert("value".to_string(), value.ok_or_else(|| Error::Config(format!("cannot read energy value in {label:?}")))?);
        "EV"
    } else {
        upper.as_str()
    };
    let mut spec = make_strategy(base, &params)?;
    if base == "EV" || base == "ELH" {
        spec.label = label.to_string();
    }
    Ok(spec)
}

impl StrategySpec {
    /// Fixed initial SOC and no cyclic linkage, so every rolling schedule is feasible for the ideal model.
    pub fn comparable(mut self) -> Self {
        self.cyclic_soc = false;
        self
    }

    fn targets_for(&self, sys: &PowerSystem) -> Result<Vec<String>> {
        if self.target_devices.is_empty() {
            return Ok(sys
                .storage
                .iter()
                .filter(|s| s.duration_class == DurationClass::Long)
                .map(|s| s.id.clone())
                .collect());
        }
        for d in &self.target_devices {
            sys.storage_index(d).ok_or_else(|| Error::UnknownDevice(d.clone()))?;
        }
        Ok(self.target_devices.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvtOutcome {
    pub device: String,
    /// 1-based in-window hour.
    pub hour: usize,
    pub target: f64,
    pub achieved: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// 1-based.
    pub index: usize,
    pub start_hour: usize,
    pub commit_hours: usize,
    pub lookahead_hours: usize,
    pub status: Status,
    pub objective: f64,
    pub gap: f64,
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub wall_time: f64,
    /// Steering terms inside `objective`, over the whole window.
    pub ev_rebate: f64,
    pub evt_penalty: f64,
    pub evt: Vec<EvtOutcome>,
}

impl WindowRecord {
    /// Progress line; `start_hour` is printed 1-based like every report.
    pub fn log_line(&self) -> String {
        format!(
            "window={} start_hour={} status={} obj={:.6} gap={:.3e} wall_s={:.3}",
            self.index, self.start_hour + 1, self.status, self.objective, self.gap, self.wall_time
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnualResult {
    pub strategy: StrategySpec,
    pub fingerprint: String,
    /// Committed hours only; `objective` holds the realized production cost.
    pub schedule: DispatchSchedule,
    pub windows: Vec<WindowRecord>,
    pub mt_wall_time: Option<f64>,
    pub total_wall_time: f64,
    /// High-water resident memory of the process, when the platform reports it.
    pub peak_memory_bytes: Option<u64>,
    pub rel_gap: f64,
}

impl AnnualResult {
    pub fn mean_window_time(&self) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().map(|w| w.wall_time).sum::<f64>() / self.windows.len() as f64
    }

    /// Fuel, start, stop and penalty costs of the committed schedule.
    pub fn production_cost(&self) -> f64 {
        self.schedule.objective.production_cost()
    }
}

/// Best-effort peak resident set size (`VmHWM`), Linux only.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// State after the `commit_hours`-th hour of `schedule`.
pub fn advance_boundary(schedule: &DispatchSchedule, commit_hours: usize) -> BoundaryState {
    let last = commit_hours - 1;
    let online: Vec<bool> = schedule.thermal.iter().map(|t| t.online[last] > 0.5).collect();
    BoundaryState {
        soc: schedule.storage.iter().map(|s| s.soc[last]).collect(),
        prev_output: schedule
            .thermal
            .iter()
            .zip(&online)
            .map(|(t, &on)| if on { t.output[last].max(0.0) } else { 0.0 })
            .collect(),
        online,
    }
}

fn solve(lp: &ldes_milp::LinearProblem, relax: bool, solver: &SolverOptions) -> Result<ldes_milp::Solution> {
    Ok(if relax { solve_lp(lp, solver)? } else { solve_milp(lp, solver)? })
}

/// One window over the whole horizon. `options.cyclic_soc` selects the cyclic variant.
pub fn run_ideal(sys: &PowerSystem, relax: bool, options: &FormulationOptions, solver: &SolverOptions) -> Result<AnnualResult> {
    let began = Instant::now();
    let mut spec = make_strategy(if relax { "ID-LP" } else { "ID" }, &BTreeMap::new())?;
    spec.cyclic_soc = options.cyclic_soc;
    spec.ideal_time_limit = solver.time_limit;
    let form = FormulationOptions { relax_binaries: relax, energy_value: None, evt: None, ..options.clone() };
    let horizon = HorizonSpec::new(0, sys.horizon_hours, 0);
    let (lp, idx) = build_ucd(sys, horizon, &BoundaryState::initial(sys), &form)?;
    let sol = solve(&lp, relax, solver)?;
    if !sol.status.has_incumbent() {
        return Err(Error::Solve { window: 1, start_hour: 0, status: sol.status });
    }
    let mut schedule = extract_schedule(sys, &sol, &idx)?;
    schedule.objective = schedule.costs(sys, 0..schedule.hours);
    let record = WindowRecord {
        index: 1,
        start_hour: 0,
        commit_hours: sys.horizon_hours,
        lookahead_hours: 0,
        status: sol.status,
        objective: sol.objective,
        gap: sol.gap,
        nodes: sol.nodes_explored,
        simplex_iterations: sol.simplex_iterations,
        wall_time: sol.wall_time,
        ev_rebate: 0.0,
        evt_penalty: 0.0,
        evt: Vec::new(),
    };
    log::info!("{}", record.log_line());
    Ok(AnnualResult {
        strategy: spec,
        fingerprint: sys.fingerprint(),
        schedule,
        windows: vec![record],
        mt_wall_time: None,
        total_wall_time: began.elapsed().as_secs_f64(),
        peak_memory_bytes: peak_memory_bytes(),
        rel_gap: solver.rel_gap,
    })
}

/// Runs `strategy` over the system horizon. Strategy settings (look-ahead, targets,
/// energy value, time limits) override the corresponding fields of `options` and `solver`.
pub fn run_strategy(
    sys: &PowerSystem,
    strategy: &StrategySpec,
    options: &FormulationOptions,
    solver: &SolverOptions,
) -> Result<AnnualResult> {
    if strategy.kind.is_ideal() {
        let form = FormulationOptions { cyclic_soc: strategy.cyclic_soc, ..options.clone() };
        let solver = SolverOptions { time_limit: strategy.ideal_time_limit, ..solver.clone() };
        let mut res = run_ideal(sys, strategy.kind == StrategyKind::IdLp, &form, &solver)?;
        res.strategy = strategy.clone();
        return Ok(res);
    }
    let began = Instant::now();
    let plan = window_plan(sys.horizon_hours, COMMIT_HOURS, strategy.lookahead_hours, strategy.tail)?;
    let devices = strategy.targets_for(sys)?;
    let mut mt_wall_time = None;
    let daily: Option<DailyTargets> = if strategy.kind == StrategyKind::EvtLaMt {
        let mt = MtOptions { network: options.network, ..MtOptions::default() };
        let traj = run_mt(sys, &mt, solver)?;
        mt_wall_time = Some(traj.wall_time);
        Some(extract_daily_targets(&traj, &devices)?)
    } else {
        None
    };
    let window_solver = SolverOptions { time_limit: strategy.per_window_time_limit, ..solver.clone() };
    let mut boundary = BoundaryState::initial(sys);
    let mut schedule = DispatchSchedule::default();
    let mut windows = Vec::with_capacity(plan.len());
    for (w, horizon) in plan.iter().enumerate() {
        let total = horizon.total();
        let mut form = FormulationOptions {
            relax_binaries: false,
            cyclic_soc: false,
            energy_value: None,
            evt: None,
            ..options.clone()
        };
        if let Some(value) = strategy.energy_value {
            let mut hours: Vec<usize> = EV_HOURS.iter().map(|&h| h.min(total)).collect();
            hours.dedup();
            form.energy_value = Some(EnergyValue { value, hours });
        }
        let evt_targets: Option<Vec<(usize, f64)>> = match strategy.kind {
            StrategyKind::EvtLa => {
                let f = strategy.evt_fraction.unwrap_or(0.5);
                Some(
                    devices
                        .iter()
                        .map(|d| {
                            let s = sys.storage_index(d).expect("checked");
                            let dev = &sys.storage[s];
                            (s, (f * dev.soc_max).clamp(dev.soc_min, dev.soc_max))
                        })
                        .collect(),
                )
            }
            StrategyKind::EvtLaMt => {
                let daily = daily.as_ref().expect("computed above");
                let day = horizon.start_hour / 24;
                Some(
                    devices
                        .iter()
                        .map(|d| {
                            let s = sys.storage_index(d).expect("checked");
                            let dev = &sys.storage[s];
                            let t = daily.get(day, d).unwrap_or(dev.initial_soc);
                            (s, t.clamp(dev.soc_min, dev.soc_max))
                        })
                        .collect(),
                )
            }
            _ => None,
        };
        let evt_hour = EVT_HOUR.min(total);
        if let Some(targets) = &evt_targets {
            form.evt = Some(EvtSpec {
                targets: targets.clone(),
                hour: evt_hour,
                mode: strategy.evt_mode,
                penalty: strategy.evt_penalty,
            });
        }
        let (lp, idx) = build_ucd(sys, *horizon, &boundary, &form)?;
        let sol = solve_milp(&lp, &window_solver)?;
        if !sol.status.has_incumbent() {
            return Err(Error::Solve { window: w + 1, start_hour: horizon.start_hour, status: sol.status });
        }
        let full = extract_schedule(sys, &sol, &idx)?;
        let evt = evt_targets
            .unwrap_or_default()
            .into_iter()
            .map(|(s, target)| EvtOutcome {
                device: sys.storage[s].id.clone(),
                hour: evt_hour,
                target,
                achieved: full.storage[s].soc[evt_hour - 1],
            })
            .collect();
        let mut kept = full.truncated(horizon.commit_hours);
        kept.objective = kept.costs(sys, 0..kept.hours);
        boundary = advance_boundary(&full, horizon.commit_hours);
        schedule.append(&kept);
        let record = WindowRecord {
            index: w + 1,
            start_hour: horizon.start_hour,
            commit_hours: horizon.commit_hours,
            lookahead_hours: horizon.lookahead_hours,
            status: sol.status,
            objective: sol.objective,
            gap: sol.gap,
            nodes: sol.nodes_explored,
            simplex_iterations: sol.simplex_iterations,
            wall_time: sol.wall_time,
            ev_rebate: full.objective.ev_rebate,
            evt_penalty: full.objective.evt_penalty,
            evt,
        };
        log::info!("{}", record.log_line());
        windows.push(record);
    }
    Ok(AnnualResult {
        strategy: strategy.clone(),
        fingerprint: sys.fingerprint(),
        schedule,
        windows,
        mt_wall_time,
        total_wall_time: began.elapsed().as_secs_f64(),
        peak_memory_bytes: peak_memory_bytes(),
        rel_gap: solver.rel_gap,
    })
}
