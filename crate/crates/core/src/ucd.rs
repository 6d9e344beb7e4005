//! Unit-commitment / economic-dispatch model for one horizon window.
//!
//! Variable names use unit ids and 1-based system hours, e.g. `p[G1][25]`,
//! `x[G1][25]`, `su[G1][25]`, `sd[G1][25]`, `r[reg_up][G1][25]`, `pv[PV1][25]`,
//! `pc[S1][25]`, `pd[S1][25]`, `soc[S1][25]`, `xc[S1][25]`, `f[L12][25]`,
//! `theta[B1][25]`, `ens[B1][25]` (unserved energy; `ens[system][h]` on a copper
//! plate), `short[reg_up][25]`, `evt_under[S1]`, `evt_over[S1]`.
//!
//! Storage bookkeeping: `soc[t] = (1 - self_discharge) soc[t-1] + eff_charge pc[t] - pd[t] / eff_discharge`.
//! Start and stop indicators are continuous in `[0, 1]`; with binary commitment
//! and `su <= x[t]`, `sd <= 1 - x[t]` they are integral at every vertex.

use ldes_milp::{LinearProblem, Sense, Solution, VarId};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::PowerSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonSpec {
    /// First system hour of the window (0-based).
    pub start_hour: usize,
    pub commit_hours: usize,
    pub lookahead_hours: usize,
}

impl HorizonSpec {
    pub fn new(start_hour: usize, commit_hours: usize, lookahead_hours: usize) -> Self {
        Self { start_hour, commit_hours, lookahead_hours }
    }

    pub fn total(&self) -> usize {
        self.commit_hours + self.lookahead_hours
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    #[default]
    CopperPlate,
    Nodal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvtMode {
    Hard,
    #[default]
    Soft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    /// 1-based in-window hour offsets.
    pub hours: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvtSpec {
    /// (storage index, target MWh)
    pub targets: Vec<(usize, f64)>,
    /// 1-based in-window hour offset.
    pub hour: usize,
    pub mode: EvtMode,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulationOptions {
    pub network: Network,
    pub relax_binaries: bool,
    pub energy_value: Option<EnergyValue>,
    pub evt: Option<EvtSpec>,
    pub cyclic_soc: bool,
    pub voll: f64,
    pub reserve_shortfall_penalty: f64,
    /// Start and stop costs in the objective (dropped by the mid-term model).
    pub commitment_costs: bool,
    /// Use forecasts for VRE availability in committed hours too (mid-term model).
    pub forecast_in_commit: bool,
    pub include_reserves: bool,
}

pub const DEFAULT_VOLL: f64 = 10_000.0;
pub const DEFAULT_RESERVE_PENALTY: f64 = 4_000.0;
pub const DEFAULT_EVT_PENALTY: f64 = 500.0;

impl Default for FormulationOptions {
    fn default() -> Self {
        Self {
            network: Network::CopperPlate,
            relax_binaries: false,
            energy_value: None,
            evt: None,
            cyclic_soc: false,
            voll: DEFAULT_VOLL,
            reserve_shortfall_penalty: DEFAULT_RESERVE_PENALTY,
            commitment_costs: true,
            forecast_in_commit: false,
            include_reserves: true,
        }
    }
}

/// Carry-over between consecutive windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub soc: Vec<f64>,
    pub online: Vec<bool>,
    pub prev_output: Vec<f64>,
}

impl BoundaryState {
    pub fn initial(sys: &PowerSystem) -> Self {
        Self {
            soc: sys.storage.iter().map(|s| s.initial_soc).collect(),
            online: sys.thermal.iter().map(|g| g.initial_online).collect(),
            prev_output: sys.thermal.iter().map(|g| if g.initial_online { g.initial_output } else { 0.0 }).collect(),
        }
    }
}

/// Where each model quantity lives in the problem. Outer vectors follow system order,
/// inner vectors the window hours.
#[derive(Clone, Debug)]
pub struct VarIndex {
    pub horizon: HorizonSpec,
    pub hours: usize,
    pub network: Network,
    pub p: Vec<Vec<VarId>>,
    pub x: Vec<Vec<VarId>>,
    pub su: Vec<Vec<VarId>>,
    pub sd: Vec<Vec<VarId>>,
    /// `[product][unit][t]`
    pub r_thermal: Vec<Vec<Vec<VarId>>>,
    pub r_storage: Vec<Vec<Vec<VarId>>>,
    pub shortfall: Vec<Vec<VarId>>,
    pub vre: Vec<Vec<VarId>>,
    pub pc: Vec<Vec<VarId>>,
    pub pd: Vec<Vec<VarId>>,
    pub soc: Vec<Vec<VarId>>,
    pub xc: Vec<Vec<VarId>>,
    pub flow: Vec<Vec<VarId>>,
    pub theta: Vec<Vec<VarId>>,
    /// One row per bus in nodal mode, a single system row on a copper plate.
    pub unserved: Vec<Vec<VarId>>,
    /// Availability (MW) used for each VRE unit and hour.
    pub vre_available: Vec<Vec<f64>>,
    pub reserve_requirement: Vec<Vec<f64>>,
    pub ev_terms: Vec<(VarId, f64)>,
    pub evt_slacks: Vec<(usize, VarId, VarId)>,
    pub evt_penalty: f64,
    pub commitment_costs: bool,
    pub cyclic_soc: bool,
    pub voll: f64,
    pub reserve_shortfall_penalty: f64,
    pub boundary: BoundaryState,
}

/// Builds the window model.
pub fn build_ucd(
    sys: &PowerSystem,
    horizon: HorizonSpec,
    boundary: &BoundaryState,
    options: &FormulationOptions,
) -> Result<(LinearProblem, VarIndex)> {
    let nt = horizon.total();
    if horizon.commit_hours == 0 {
        return Err(Error::Build("commit_hours must be at least 1".into()));
    }
    if horizon.start_hour + nt > sys.horizon_hours {
        return Err(Error::Build(format!(
            "window {}..{} exceeds system horizon {}",
            horizon.start_hour,
            horizon.start_hour + nt,
            sys.horizon_hours
        )));
    }
    if boundary.soc.len() != sys.storage.len()
        || boundary.online.len() != sys.thermal.len()
        || boundary.prev_output.len() != sys.thermal.len()
    {
        return Err(Error::Build("boundary state does not match system devices".into()));
    }
    if options.network == Network::Nodal && sys.reference_bus().is_none() {
        return Err(Error::Build("nodal network needs a reference bus".into()));
    }
    let hour_label = |t: usize| horizon.start_hour + t + 1;
    let bin_kind = |p: &mut LinearProblem, name: String| {
        if options.relax_binaries {
            p.add_continuous(name, 0.0, 1.0)
        } else {
            p.add_binary(name)
        }
    };
    let series = |n: usize| -> Vec<Vec<VarId>> { vec![Vec::with_capacity(nt); n] };

    let mut lp = LinearProblem::new();
    let ng = sys.thermal.len();
    let ns = sys.storage.len();
    let nr = if options.include_reserves { sys.reserves.len() } else { 0 };
    let mut idx = VarIndex {
        horizon,
        hours: nt,
        network: options.network,
        p: series(ng),
        x: series(ng),
        su: series(ng),
        sd: series(ng),
        r_thermal: vec![series(ng); nr],
        r_storage: vec![series(ns); nr],
        shortfall: series(nr),
        vre: series(sys.vre.len()),
        pc: series(ns),
        pd: series(ns),
        soc: series(ns),
        xc: series(ns),
        flow: Vec::new(),
        theta: Vec::new(),
        unserved: Vec::new(),
        vre_available: vec![Vec::with_capacity(nt); sys.vre.len()],
        reserve_requirement: vec![Vec::with_capacity(nt); nr],
        ev_terms: Vec::new(),
        evt_slacks: Vec::new(),
        evt_penalty: 0.0,
        commitment_costs: options.commitment_costs,
        cyclic_soc: options.cyclic_soc,
        voll: options.voll,
        reserve_shortfall_penalty: options.reserve_shortfall_penalty,
        boundary: boundary.clone(),
    };

    // Variables, hour-major so that each hour's block is contiguous.
    for t in 0..nt {
        let h = hour_label(t);
        let sh = horizon.start_hour + t;
        for (g, gen) in sys.thermal.iter().enumerate() {
            idx.p[g].push(lp.add_continuous(format!("p[{}][{h}]", gen.id), 0.0, gen.p_max));
            idx.x[g].push(bin_kind(&mut lp, format!("x[{}][{h}]", gen.id)));
            idx.su[g].push(lp.add_continuous(format!("su[{}][{h}]", gen.id), 0.0, 1.0));
            idx.sd[g].push(lp.add_continuous(format!("sd[{}][{h}]", gen.id), 0.0, 1.0));
        }
        for (v, unit) in sys.vre.iter().enumerate() {
            let avail = if t < horizon.commit_hours && !options.forecast_in_commit {
                unit.available_mw(sh)
            } else {
                unit.forecast_mw(sh)
            };
            idx.vre_available[v].push(avail);
            idx.vre[v].push(lp.add_continuous(format!("pv[{}][{h}]", unit.id), 0.0, avail));
        }
        for (s, dev) in sys.storage.iter().enumerate() {
            idx.pc[s].push(lp.add_continuous(format!("pc[{}][{h}]", dev.id), 0.0, dev.charge_max));
            idx.pd[s].push(lp.add_continuous(format!("pd[{}][{h}]", dev.id), 0.0, dev.discharge_max));
            idx.soc[s].push(lp.add_continuous(format!("soc[{}][{h}]", dev.id), dev.soc_min, dev.soc_max));
            idx.xc[s].push(bin_kind(&mut lp, format!("xc[{}][{h}]", dev.id)));
        }
        for (r, prod) in sys.reserves.iter().take(nr).enumerate() {
            idx.reserve_requirement[r].push(sys.reserve_requirement(prod, sh)?);
            for (g, gen) in sys.thermal.iter().enumerate() {
                idx.r_thermal[r][g].push(lp.add_continuous(format!("r[{}][{}][{h}]", prod.id, gen.id), 0.0, gen.p_max));
            }
            for (s, dev) in sys.storage.iter().enumerate() {
                let cap = dev.discharge_max + dev.charge_max;
                idx.r_storage[r][s].push(lp.add_continuous(format!("r[{}][{}][{h}]", prod.id, dev.id), 0.0, cap));
            }
            idx.shortfall[r].push(lp.add_continuous(format!("short[{}][{h}]", prod.id), 0.0, f64::INFINITY));
        }
    }
    match options.network {
        Network::CopperPlate => {
            idx.unserved = vec![(0..nt)
                .map(|t| lp.add_continuous(format!("ens[system][{}]", hour_label(t)), 0.0, f64::INFINITY))
                .collect()];
        }
        Network::Nodal => {
            let reference = sys.reference_bus().expect("checked above");
            idx.unserved = sys
                .buses
                .iter()
                .map(|b| {
                    (0..nt)
                        .map(|t| lp.add_continuous(format!("ens[{}][{}]", b.id, hour_label(t)), 0.0, f64::INFINITY))
                        .collect()
                })
                .collect();
            idx.theta = sys
                .buses
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    (0..nt)
                        .map(|t| {
                            let name = format!("theta[{}][{}]", b.id, hour_label(t));
                            if k == reference {
                                lp.add_continuous(name, 0.0, 0.0)
                            } else {
                                lp.add_continuous(name, b.angle_min, b.angle_max)
                            }
                        })
                        .collect()
                })
                .collect();
            idx.flow = sys
                .lines
                .iter()
                .map(|l| {
                    (0..nt)
                        .map(|t| lp.add_continuous(format!("f[{}][{}]", l.id, hour_label(t)), l.flow_min, l.flow_max))
                        .collect()
                })
                .collect();
        }
    }

    // Objective.
    for t in 0..nt {
        for (g, gen) in sys.thermal.iter().enumerate() {
            lp.add_objective_term(idx.p[g][t], gen.fuel_cost);
            if options.commitment_costs {
                lp.add_objective_term(idx.su[g][t], gen.start_cost);
                lp.add_objective_term(idx.sd[g][t], gen.stop_cost);
            }
        }
        for row in &idx.unserved {
            lp.add_objective_term(row[t], options.voll);
        }
        for r in 0..nr {
            lp.add_objective_term(idx.shortfall[r][t], options.reserve_shortfall_penalty);
        }
    }

    // Constraints.
    let bus_of = |id: &str| sys.bus_index(id).expect("validated system");
    for t in 0..nt {
        let h = hour_label(t);
        let sh = horizon.start_hour + t;
        match options.network {
            Network::CopperPlate => {
                let mut terms = Vec::new();
                for g in 0..ng {
                    terms.push((idx.p[g][t], 1.0));
                }
                for v in 0..sys.vre.len() {
                    terms.push((idx.vre[v][t], 1.0));
                }
                for s in 0..ns {
                    terms.push((idx.pd[s][t], 1.0));
                    terms.push((idx.pc[s][t], -1.0));
                }
                terms.push((idx.unserved[0][t], 1.0));
                lp.add_constraint(format!("balance[{h}]"), terms, Sense::Eq, sys.total_load(sh));
            }
            Network::Nodal => {
                let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); sys.buses.len()];
                for (g, gen) in sys.thermal.iter().enumerate() {
                    rows[bus_of(&gen.bus)].push((idx.p[g][t], 1.0));
                }
                for (v, unit) in sys.vre.iter().enumerate() {
                    rows[bus_of(&unit.bus)].push((idx.vre[v][t], 1.0));
                }
                for (s, dev) in sys.storage.iter().enumerate() {
                    let k = bus_of(&dev.bus);
                    rows[k].push((idx.pd[s][t], 1.0));
                    rows[k].push((idx.pc[s][t], -1.0));
                }
                for (l, line) in sys.lines.iter().enumerate() {
                    rows[bus_of(&line.from_bus)].push((idx.flow[l][t], -1.0));
                    rows[bus_of(&line.to_bus)].push((idx.flow[l][t], 1.0));
                }
                for (k, terms) in rows.into_iter().enumerate() {
                    let mut terms = terms;
                    terms.push((idx.unserved[k][t], 1.0));
                    lp.add_constraint(
                        format!("balance[{}][{h}]", sys.buses[k].id),
                        terms,
                        Sense::Eq,
                        sys.bus_load(k, sh),
                    );
                }
                for (l, line) in sys.lines.iter().enumerate() {
                    let b = sys.base_power * line.susceptance;
                    let (a, c) = (bus_of(&line.from_bus), bus_of(&line.to_bus));
                    lp.add_constraint(
                        format!("flow[{}][{h}]", line.id),
                        vec![(idx.flow[l][t], 1.0), (idx.theta[a][t], -b), (idx.theta[c][t], b)],
                        Sense::Eq,
                        0.0,
                    );
                }
            }
        }

        for (g, gen) in sys.thermal.iter().enumerate() {
            let (p, x, su, sd) = (idx.p[g][t], idx.x[g][t], idx.su[g][t], idx.sd[g][t]);
            let mut head = vec![(p, 1.0)];
            for r in 0..nr {
                head.push((idx.r_thermal[r][g][t], 1.0));
            }
            let mut upper = head.clone();
            upper.push((x, -gen.p_max));
            lp.add_constraint(format!("cap_hi[{}][{h}]", gen.id), upper, Sense::Le, 0.0);
            let mut lower = head;
            lower.push((x, -gen.p_min));
            lp.add_constraint(format!("cap_lo[{}][{h}]", gen.id), lower, Sense::Ge, 0.0);

            // Ramping; a start (stop) may jump to (from) p_min even when the ramp rate is smaller.
            let start_room = (gen.p_min - gen.ramp_up).max(0.0);
            let stop_room = (gen.p_min - gen.ramp_down).max(0.0);
            // Commitment logic: x[t] - x[t-1] = su - sd
            if t == 0 {
                let prev = boundary.prev_output[g];
                lp.add_constraint(
                    format!("ramp_up[{}][{h}]", gen.id),
                    vec![(p, 1.0), (su, -start_room)],
                    Sense::Le,
                    gen.ramp_up + prev,
                );
                lp.add_constraint(
                    format!("ramp_dn[{}][{h}]", gen.id),
                    vec![(p, -1.0), (sd, -stop_room)],
                    Sense::Le,
                    gen.ramp_down - prev,
                );
                let online = if boundary.online[g] { 1.0 } else { 0.0 };
                lp.add_constraint(
                    format!("commit[{}][{h}]", gen.id),
                    vec![(x, 1.0), (su, -1.0), (sd, 1.0)],
                    Sense::Eq,
                    online,
                );
            } else {
                let (pp, xp) = (idx.p[g][t - 1], idx.x[g][t - 1]);
                lp.add_constraint(
                    format!("ramp_up[{}][{h}]", gen.id),
                    vec![(p, 1.0), (pp, -1.0), (su, -start_room)],
                    Sense::Le,
                    gen.ramp_up,
                );
                lp.add_constraint(
                    format!("ramp_dn[{}][{h}]", gen.id),
                    vec![(pp, 1.0), (p, -1.0), (sd, -stop_room)],
                    Sense::Le,
                    gen.ramp_down,
                );
                lp.add_constraint(
                    format!("commit[{}][{h}]", gen.id),
                    vec![(xp, 1.0), (x, -1.0), (su, 1.0), (sd, -1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
            lp.add_constraint(format!("su_on[{}][{h}]", gen.id), vec![(su, 1.0), (x, -1.0)], Sense::Le, 0.0);
            lp.add_constraint(format!("sd_off[{}][{h}]", gen.id), vec![(sd, 1.0), (x, 1.0)], Sense::Le, 1.0);
        }

        for r in 0..nr {
            let mut terms = Vec::new();
            for g in 0..ng {
                terms.push((idx.r_thermal[r][g][t], 1.0));
            }
            for s in 0..ns {
                terms.push((idx.r_storage[r][s][t], 1.0));
            }
            terms.push((idx.shortfall[r][t], 1.0));
            let req = idx.reserve_requirement[r][t];
            lp.add_constraint(format!("reserve[{}][{h}]", sys.reserves[r].id), terms, Sense::Ge, req);
        }

        for (s, dev) in sys.storage.iter().enumerate() {
            let (pc, pd, soc, xc) = (idx.pc[s][t], idx.pd[s][t], idx.soc[s][t], idx.xc[s][t]);
            lp.add_constraint(format!("charge_mode[{}][{h}]", dev.id), vec![(pc, 1.0), (xc, -dev.charge_max)], Sense::Le, 0.0);
            lp.add_constraint(
                format!("discharge_mode[{}][{h}]", dev.id),
                vec![(pd, 1.0), (xc, dev.discharge_max)],
                Sense::Le,
                dev.discharge_max,
            );
            let keep = 1.0 - dev.self_discharge;
            let mut terms = vec![(soc, 1.0), (pc, -dev.eff_charge), (pd, 1.0 / dev.eff_discharge)];
            let rhs = if t > 0 {
                terms.push((idx.soc[s][t - 1], -keep));
                0.0
            } else if options.cyclic_soc {
                terms.push((idx.soc[s][nt - 1], -keep));
                0.0
            } else {
                keep * boundary.soc[s]
            };
            lp.add_constraint(format!("soc_balance[{}][{h}]", dev.id), terms, Sense::Eq, rhs);
            let mut head = vec![(pd, 1.0), (pc, -1.0)];
            for r in 0..nr {
                head.push((idx.r_storage[r][s][t], 1.0));
            }
            lp.add_constraint(format!("headroom[{}][{h}]", dev.id), head, Sense::Le, dev.discharge_max);
        }
    }

    if let Some(ev) = &options.energy_value {
        attach_energy_value(&mut lp, &mut idx, ev.value, &ev.hours)?;
    }
    if let Some(evt) = &options.evt {
        let max_fuel = sys.thermal.iter().map(|g| g.fuel_cost).fold(0.0, f64::max);
        if evt.mode == EvtMode::Soft && !(options.voll > evt.penalty && evt.penalty > max_fuel) {
            return Err(Error::Build(format!(
                "penalty ordering violated: need voll ({}) > evt penalty ({}) > max fuel cost ({max_fuel})",
                options.voll, evt.penalty
            )));
        }
        attach_evt(&mut lp, &mut idx, sys, &evt.targets, evt.hour, evt.mode, evt.penalty)?;
    }
    Ok((lp, idx))
}

/// Adds `-value * soc[s][t]` to the objective for every storage device and listed 1-based offset.
pub fn attach_energy_value(lp: &mut LinearProblem, idx: &mut VarIndex, value: f64, hours: &[usize]) -> Result<()> {
    for &h in hours {
        if h == 0 || h > idx.hours {
            return Err(Error::Build(format!("energy-value hour {h} outside window 1..={}", idx.hours)));
        }
    }
    if value == 0.0 {
        return Ok(());
    }
    for s in 0..idx.soc.len() {
        for &h in hours {
            let v = idx.soc[s][h - 1];
            lp.add_objective_term(v, -value);
            idx.ev_terms.push((v, value));
        }
    }
    Ok(())
}

/// Pins (hard) or penalises deviation from (soft) the listed storage targets at a 1-based offset.
pub fn attach_evt(
    lp: &mut LinearProblem,
    idx: &mut VarIndex,
    sys: &PowerSystem,
    targets: &[(usize, f64)],
    hour: usize,
    mode: EvtMode,
    penalty: f64,
) -> Result<()> {
    if hour == 0 || hour > idx.hours {
        return Err(Error::Build(format!("target hour {hour} outside window 1..={}", idx.hours)));
    }
    for &(s, target) in targets {
        let dev = sys
            .storage
            .get(s)
            .ok_or_else(|| Error::Build(format!("target references unknown storage index {s}")))?;
        if !(target >= dev.soc_min - 1e-9 && target <= dev.soc_max + 1e-9) {
            return Err(Error::Build(format!(
                "target {target} for {} outside [{}, {}]",
                dev.id, dev.soc_min, dev.soc_max
            )));
        }
        let soc = idx.soc[s][hour - 1];
        match mode {
            EvtMode::Hard => {
                lp.add_constraint(format!("evt[{}]", dev.id), vec![(soc, 1.0)], Sense::Eq, target);
            }
            EvtMode::Soft => {
                let under = lp.add_continuous(format!("evt_under[{}]", dev.id), 0.0, f64::INFINITY);
                let over = lp.add_continuous(format!("evt_over[{}]", dev.id), 0.0, f64::INFINITY);
                lp.add_objective_term(under, penalty);
                lp.add_objective_term(over, penalty);
                lp.add_constraint(
                    format!("evt[{}]", dev.id),
                    vec![(soc, 1.0), (under, 1.0), (over, -1.0)],
                    Sense::Eq,
                    target,
                );
                idx.evt_slacks.push((s, under, over));
                idx.evt_penalty = penalty;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub fuel: f64,
    pub start: f64,
    pub stop: f64,
    pub unserved_penalty: f64,
    pub reserve_penalty: f64,
    pub evt_penalty: f64,
    /// Stored-energy credit subtracted from the solver objective (not a cost).
    pub ev_rebate: f64,
}

impl ObjectiveBreakdown {
    /// Solver objective: every component with the rebate subtracted.
    pub fn objective(&self) -> f64 {
        self.production_cost() + self.evt_penalty - self.ev_rebate
    }

    /// Fuel, start, stop and penalty costs actually incurred.
    pub fn production_cost(&self) -> f64 {
        self.fuel + self.start + self.stop + self.unserved_penalty + self.reserve_penalty
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThermalTrace {
    pub output: Vec<f64>,
    pub online: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VreTrace {
    pub available: Vec<f64>,
    pub dispatch: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageTrace {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub soc: Vec<f64>,
    pub charge_mode: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReserveTrace {
    pub requirement: Vec<f64>,
    /// `[unit][t]`
    pub thermal: Vec<Vec<f64>>,
    pub storage: Vec<Vec<f64>>,
    pub shortfall: Vec<f64>,
}

/// Hourly decisions for a span of system hours.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    /// First system hour (0-based).
    pub start_hour: usize,
    pub hours: usize,
    /// Leading hours that are kept; the rest is look-ahead.
    pub committed_hours: usize,
    pub network: Network,
    pub thermal: Vec<ThermalTrace>,
    pub vre: Vec<VreTrace>,
    pub storage: Vec<StorageTrace>,
    pub reserves: Vec<ReserveTrace>,
    pub flows: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
    /// Per bus in nodal mode, one system row on a copper plate.
    pub unserved: Vec<Vec<f64>>,
    pub voll: f64,
    pub reserve_shortfall_penalty: f64,
    /// Storage SOC before the first hour.
    pub initial_soc: Vec<f64>,
    pub initial_online: Vec<bool>,
    pub initial_output: Vec<f64>,
    pub objective: ObjectiveBreakdown,
}

fn take(sol: &Solution, rows: &[Vec<VarId>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| sol.values[v.0]).collect()).collect()
}

/// Reads the solved window back into a schedule; objective components cover the whole window.
pub fn extract_schedule(sys: &PowerSystem, solution: &Solution, idx: &VarIndex) -> Result<DispatchSchedule> {
    if !solution.status.has_incumbent() || solution.values.is_empty() {
        return Err(Error::Extract(format!("solution status {} carries no values", solution.status)));
    }
    let nt = idx.hours;
    let p = take(solution, &idx.p);
    let x = take(solution, &idx.x);
    let su = take(solution, &idx.su);
    let sd = take(solution, &idx.sd);
    let thermal: Vec<ThermalTrace> = (0..p.len())
        .map(|g| ThermalTrace { output: p[g].clone(), online: x[g].clone(), start: su[g].clone(), stop: sd[g].clone() })
        .collect();
    let vre_dispatch = take(solution, &idx.vre);
    let vre = vre_dispatch
        .into_iter()
        .zip(&idx.vre_available)
        .map(|(dispatch, available)| VreTrace { available: available.clone(), dispatch })
        .collect();
    let (pc, pd, soc, xc) = (take(solution, &idx.pc), take(solution, &idx.pd), take(solution, &idx.soc), take(solution, &idx.xc));
    let storage = (0..pc.len())
        .map(|s| StorageTrace {
            charge: pc[s].clone(),
            discharge: pd[s].clone(),
            soc: soc[s].clone(),
            charge_mode: xc[s].clone(),
        })
        .collect();
    let reserves = (0..idx.shortfall.len())
        .map(|r| ReserveTrace {
            requirement: idx.reserve_requirement[r].clone(),
            thermal: take(solution, &idx.r_thermal[r]),
            storage: take(solution, &idx.r_storage[r]),
            shortfall: idx.shortfall[r].iter().map(|v| solution.values[v.0]).collect(),
        })
        .collect();
    let initial_soc = if idx.cyclic_soc {
        // soc[T] stands in for the state before hour 1
        soc.iter().map(|s| s[nt - 1]).collect()
    } else {
        idx.boundary.soc.clone()
    };
    let mut sched = DispatchSchedule {
        start_hour: idx.horizon.start_hour,
        hours: nt,
        committed_hours: idx.horizon.commit_hours.min(nt),
        network: idx.network,
        thermal,
        vre,
        storage,
        reserves,
        flows: take(solution, &idx.flow),
        angles: take(solution, &idx.theta),
        unserved: take(solution, &idx.unserved),
        voll: idx.voll,
        reserve_shortfall_penalty: idx.reserve_shortfall_penalty,
        initial_soc,
        initial_online: idx.boundary.online.clone(),
        initial_output: idx.boundary.prev_output.clone(),
        objective: ObjectiveBreakdown::default(),
    };
    let mut obj = sched.costs(sys, 0..nt);
    if !idx.commitment_costs {
        obj.start = 0.0;
        obj.stop = 0.0;
    }
    // folds from +0.0: an empty f64 sum is -0.0, which would leak into reports
    obj.evt_penalty = idx
        .evt_slacks
        .iter()
        .map(|&(_, u, o)| idx.evt_penalty * (solution.values[u.0] + solution.values[o.0]))
        .fold(0.0, |a, b| a + b);
    obj.ev_rebate = idx.ev_terms.iter().map(|&(v, value)| value * solution.values[v.0]).fold(0.0, |a, b| a + b);
    sched.objective = obj;
    Ok(sched)
}

impl DispatchSchedule {
    /// Fuel, start/stop and penalty costs over the given schedule-relative hours.
    pub fn costs(&self, sys: &PowerSystem, hours: std::ops::Range<usize>) -> ObjectiveBreakdown {
        let mut b = ObjectiveBreakdown::default();
        for t in hours {
            for (g, gen) in sys.thermal.iter().enumerate() {
                let tr = &self.thermal[g];
                b.fuel += gen.fuel_cost * tr.output[t];
                b.start += gen.start_cost * tr.start[t];
                b.stop += gen.stop_cost * tr.stop[t];
            }
            b.unserved_penalty += self.voll * self.unserved.iter().map(|u| u[t]).sum::<f64>();
            b.reserve_penalty +=
                self.reserve_shortfall_penalty * self.reserves.iter().map(|r| r.shortfall[t]).sum::<f64>();
        }
        b
    }

    /// Keeps only the first `hours` hours.
    pub fn truncated(&self, hours: usize) -> DispatchSchedule {
        fn cut(v: &[f64], n: usize) -> Vec<f64> {
            v[..n].to_vec()
        }
        fn cut2(v: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
            v.iter().map(|x| cut(x, n)).collect()
        }
        let n = hours.min(self.hours);
        DispatchSchedule {
            start_hour: self.start_hour,
            hours: n,
            committed_hours: self.committed_hours.min(n),
            network: self.network,
            thermal: self
                .thermal
                .iter()
                .map(|t| ThermalTrace {
                    output: cut(&t.output, n),
                    online: cut(&t.online, n),
                    start: cut(&t.start, n),
                    stop: cut(&t.stop, n),
                })
                .collect(),
            vre: self
                .vre
                .iter()
                .map(|v| VreTrace { available: cut(&v.available, n), dispatch: cut(&v.dispatch, n) })
                .collect(),
            storage: self
                .storage
                .iter()
                .map(|s| StorageTrace {
                    charge: cut(&s.charge, n),
                    discharge: cut(&s.discharge, n),
                    soc: cut(&s.soc, n),
                    charge_mode: cut(&s.charge_mode, n),
                })
                .collect(),
            reserves: self
                .reserves
                .iter()
                .map(|r| ReserveTrace {
                    requirement: cut(&r.requirement, n),
                    thermal: cut2(&r.thermal, n),
                    storage: cut2(&r.storage, n),
                    shortfall: cut(&r.shortfall, n),
                })
                .collect(),
            flows: cut2(&self.flows, n),
            angles: cut2(&self.angles, n),
            unserved: cut2(&self.unserved, n),
            voll: self.voll,
            reserve_shortfall_penalty: self.reserve_shortfall_penalty,
            initial_soc: self.initial_soc.clone(),
            initial_online: self.initial_online.clone(),
            initial_output: self.initial_output.clone(),
            objective: ObjectiveBreakdown::default(),
        }
    }

    /// Appends a schedule that starts where this one ends.
    pub fn append(&mut self, other: &DispatchSchedule) {
        fn ext(a: &mut Vec<f64>, b: &[f64]) {
            a.extend_from_slice(b);
        }
        fn ext2(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
            for (x, y) in a.iter_mut().zip(b) {
                x.extend_from_slice(y);
            }
        }
        if self.hours == 0 && self.thermal.is_empty() && self.storage.is_empty() && self.vre.is_empty() {
            *self = other.clone();
            return;
        }
        debug_assert_eq!(self.start_hour + self.hours, other.start_hour);
        for (a, b) in self.thermal.iter_mut().zip(&other.thermal) {
            ext(&mut a.output, &b.output);
            ext(&mut a.online, &b.online);
            ext(&mut a.start, &b.start);
            ext(&mut a.stop, &b.stop);
        }
        for (a, b) in self.vre.iter_mut().zip(&other.vre) {
            ext(&mut a.available, &b.available);
            ext(&mut a.dispatch, &b.dispatch);
        }
        for (a, b) in self.storage.iter_mut().zip(&other.storage) {
            ext(&mut a.charge, &b.charge);
            ext(&mut a.discharge, &b.discharge);
            ext(&mut a.soc, &b.soc);
            ext(&mut a.charge_mode, &b.charge_mode);
        }
        for (a, b) in self.reserves.iter_mut().zip(&other.reserves) {
            ext(&mut a.requirement, &b.requirement);
            ext2(&mut a.thermal, &b.thermal);
            ext2(&mut a.storage, &b.storage);
            ext(&mut a.shortfall, &b.shortfall);
        }
        ext2(&mut self.flows, &other.flows);
        ext2(&mut self.angles, &other.angles);
        ext2(&mut self.unserved, &other.unserved);
        self.hours += other.hours;
        self.committed_hours += other.committed_hours;
        let o = &other.objective;
        let s = &mut self.objective;
        s.fuel += o.fuel;
        s.start += o.start;
        s.stop += o.stop;
        s.unserved_penalty += o.unserved_penalty;
        s.reserve_penalty += o.reserve_penalty;
        s.evt_penalty += o.evt_penalty;
        s.ev_rebate += o.ev_rebate;
    }
}
