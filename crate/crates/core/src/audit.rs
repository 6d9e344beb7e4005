//! Physical residual checks on a schedule, recomputed from the system data alone.

use serde::{Deserialize, Serialize};

use crate::system::PowerSystem;
use crate::ucd::{DispatchSchedule, Network};

/// Worst violation of each model rule over the schedule; zero means satisfied.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAudit {
    /// Supply minus demand (system-wide or per bus with flows).
    pub balance: f64,
    /// Deviation from `soc[t] = (1 - sd) soc[t-1] + eff_c pc[t] - pd[t] / eff_d`.
    pub soc_recursion: f64,
    pub soc_bounds: f64,
    /// `pc * pd / (charge_max * discharge_max)`.
    pub exclusivity: f64,
    /// Excess of `pd + sum r` over `discharge_max + pc`.
    pub storage_headroom: f64,
    /// `|x[t] - x[t-1] - (su - sd)|`, plus any simultaneous start and stop.
    pub commitment: f64,
    /// Output-plus-reserve envelope, ramping, and device power limits.
    pub generator_limits: f64,
    pub reserve_adequacy: f64,
    /// `|f - base_power * B * (theta_from - theta_to)|`, flow and angle limits.
    pub network: f64,
    pub vre_limit: f64,
    pub integrality: f64,
}

impl ScheduleAudit {
    pub fn worst(&self) -> f64 {
        [
            self.balance,
            self.soc_recursion,
            self.soc_bounds,
            self.exclusivity,
            self.storage_headroom,
            self.commitment,
            self.generator_limits,
            self.reserve_adequacy,
            self.network,
            self.vre_limit,
            self.integrality,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

fn above(v: f64, limit: f64) -> f64 {
    (v - limit).max(0.0)
}

/// Checks every hour of `sched`. Hour `t` of the schedule is system hour `sched.start_hour + t`.
pub fn audit_schedule(sys: &PowerSystem, sched: &DispatchSchedule) -> ScheduleAudit {
    let mut a = ScheduleAudit::default();
    let nt = sched.hours;
    for t in 0..nt {
        let h = sched.start_hour + t;
        // balance
        match sched.network {
            Network::CopperPlate => {
                let mut supply = 0.0;
                for tr in &sched.thermal {
                    supply += tr.output[t];
                }
                for v in &sched.vre {
                    supply += v.dispatch[t];
                }
                for s in &sched.storage {
                    supply += s.discharge[t] - s.charge[t];
                }
                supply += sched.unserved.iter().map(|u| u[t]).sum::<f64>();
                a.balance = a.balance.max((supply - sys.total_load(h)).abs());
            }
            Network::Nodal => {
                let mut net = vec![0.0; sys.buses.len()];
                let bus = |id: &str| sys.bus_index(id).expect("validated");
                for (g, gen) in sys.thermal.iter().enumerate() {
                    net[bus(&gen.bus)] += sched.thermal[g].output[t];
                }
                for (v, unit) in sys.vre.iter().enumerate() {
                    net[bus(&unit.bus)] += sched.vre[v].dispatch[t];
                }
                for (s, dev) in sys.storage.iter().enumerate() {
                    net[bus(&dev.bus)] += sched.storage[s].discharge[t] - sched.storage[s].charge[t];
                }
                for (l, line) in sys.lines.iter().enumerate() {
                    let f = sched.flows[l][t];
                    net[bus(&line.from_bus)] -= f;
                    net[bus(&line.to_bus)] += f;
                    let theta = |k: usize| sched.angles[k][t];
                    let expect = sys.base_power * line.susceptance * (theta(bus(&line.from_bus)) - theta(bus(&line.to_bus)));
                    a.network = a.network.max((f - expect).abs());
                    a.network = a.network.max(above(f, line.flow_max)).max(above(line.flow_min, f));
                }
                for (k, b) in sys.buses.iter().enumerate() {
                    let th = sched.angles[k][t];
                    a.network = a.network.max(above(th, b.angle_max)).max(above(b.angle_min, th));
                    if b.is_reference {
                        a.network = a.network.max(th.abs());
                    }
                    net[k] += sched.unserved[k][t];
                    a.balance = a.balance.max((net[k] - sys.bus_load(k, h)).abs());
                }
            }
        }
        // thermal units
        for (g, gen) in sys.thermal.iter().enumerate() {
            let tr = &sched.thermal[g];
            let (p, x, su, sd) = (tr.output[t], tr.online[t], tr.start[t], tr.stop[t]);
            let r: f64 = sched.reserves.iter().map(|rt| rt.thermal[g][t]).sum();
            let lim = &mut a.generator_limits;
            *lim = lim.max(above(p + r, gen.p_max * x)).max(above(gen.p_min * x, p + r)).max(above(0.0, p));
            let (x_prev, p_prev) = if t == 0 {
                (if sched.initial_online[g] { 1.0 } else { 0.0 }, sched.initial_output[g])
            } else {
                (tr.online[t - 1], tr.output[t - 1])
            };
            let start_room = (gen.p_min - gen.ramp_up).max(0.0);
            let stop_room = (gen.p_min - gen.ramp_down).max(0.0);
            *lim = lim.max(above(p - p_prev, gen.ramp_up + start_room * su));
            *lim = lim.max(above(p_prev - p, gen.ramp_down + stop_room * sd));
            a.commitment = a.commitment.max((x - x_prev - (su - sd)).abs()).max(su * sd);
            a.integrality = a.integrality.max((x - x.round()).abs());
        }
        // storage
        for (s, dev) in sys.storage.iter().enumerate() {
            let st = &sched.storage[s];
            let (pc, pd, soc) = (st.charge[t], st.discharge[t], st.soc[t]);
            let prev = if t == 0 { sched.initial_soc[s] } else { st.soc[t - 1] };
            let expect = (1.0 - dev.self_discharge) * prev + dev.eff_charge * pc - pd / dev.eff_discharge;
            a.soc_recursion = a.soc_recursion.max((soc - expect).abs());
            a.soc_bounds = a.soc_bounds.max(above(soc, dev.soc_max)).max(above(dev.soc_min, soc));
            a.exclusivity = a.exclusivity.max(pc.max(0.0) * pd.max(0.0) / (dev.charge_max * dev.discharge_max));
            let r: f64 = sched.reserves.iter().map(|rt| rt.storage[s][t]).sum();
            a.storage_headroom = a.storage_headroom.max(above(pd + r, dev.discharge_max + pc));
            let lim = &mut a.generator_limits;
            *lim = lim
                .max(above(pc, dev.charge_max))
                .max(above(pd, dev.discharge_max))
                .max(above(0.0, pc))
                .max(above(0.0, pd));
            a.integrality = a.integrality.max((st.charge_mode[t] - st.charge_mode[t].round()).abs());
        }
        for (v, unit) in sys.vre.iter().enumerate() {
            let d = sched.vre[v].dispatch[t];
            a.vre_limit = a.vre_limit.max(above(d, unit.available_mw(h).max(sched.vre[v].available[t]))).max(above(0.0, d));
        }
        for rt in &sched.reserves {
            let provided: f64 = rt.thermal.iter().chain(&rt.storage).map(|r| r[t]).sum::<f64>() + rt.shortfall[t];
            a.reserve_adequacy = a.reserve_adequacy.max(above(rt.requirement[t], provided));
        }
    }
    a
}
