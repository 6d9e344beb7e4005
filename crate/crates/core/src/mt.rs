//! Mid-term scheduling: a rolling weekly LP without commitment, used to derive
//! end-of-day storage targets.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ldes_milp::{solve_lp, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::engine::{advance_boundary, window_plan, TailMode};
use crate::error::{Error, Result};
use crate::system::PowerSystem;
use crate::ucd::{build_ucd, extract_schedule, BoundaryState, FormulationOptions, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtOptions {
    pub commit_weeks: usize,
    pub lookahead_weeks: usize,
    pub include_reserves: bool,
    pub network: Network,
}

impl Default for MtOptions {
    fn default() -> Self {
        Self { commit_weeks: 1, lookahead_weeks: 1, include_reserves: true, network: Network::CopperPlate }
    }
}

/// Hourly SOC per storage device over the whole horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocTrajectory {
    pub devices: Vec<String>,
    /// `[device][hour]`
    pub soc: Vec<Vec<f64>>,
    pub windows: usize,
    pub wall_time: f64,
}

/// Solves consecutive relaxed windows and concatenates their committed SOC.
pub fn run_mt(sys: &PowerSystem, options: &MtOptions, solver: &SolverOptions) -> Result<SocTrajectory> {
    if options.commit_weeks == 0 {
        return Err(Error::Config("mid-term commit window must be at least one week".into()));
    }
    let began = Instant::now();
    let plan = window_plan(sys.horizon_hours, 168 * options.commit_weeks, 168 * options.lookahead_weeks, TailMode::Clamp)?;
    let form = FormulationOptions {
        network: options.network,
        relax_binaries: true,
        commitment_costs: false,
        forecast_in_commit: true,
        include_reserves: options.include_reserves,
        ..FormulationOptions::default()
    };
    let mut boundary = BoundaryState::initial(sys);
    let mut soc = vec![Vec::with_capacity(sys.horizon_hours); sys.storage.len()];
    for (w, horizon) in plan.iter().enumerate() {
        let (lp, idx) = build_ucd(sys, *horizon, &boundary, &form)?;
        let sol = solve_lp(&lp, solver)?;
        if !sol.status.has_incumbent() {
            return Err(Error::Solve { window: w + 1, start_hour: horizon.start_hour, status: sol.status });
        }
        let sched = extract_schedule(sys, &sol, &idx)?;
        for (s, trace) in sched.storage.iter().enumerate() {
            soc[s].extend_from_slice(&trace.soc[..horizon.commit_hours]);
        }
        boundary = advance_boundary(&sched, horizon.commit_hours);
        log::debug!("mt window={} start_hour={} obj={:.6}", w + 1, horizon.start_hour, sol.objective);
    }
    Ok(SocTrajectory {
        devices: sys.storage.iter().map(|s| s.id.clone()).collect(),
        soc,
        windows: plan.len(),
        wall_time: began.elapsed().as_secs_f64(),
    })
}

/// Targets per rolling window day: `targets[day][k]` is for `devices[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyTargets {
    pub devices: Vec<String>,
    pub targets: Vec<Vec<f64>>,
}

impl DailyTargets {
    /// Target for `device` in the window starting on 0-based `day`.
    pub fn get(&self, day: usize, device: &str) -> Option<f64> {
        let k = self.devices.iter().position(|d| d == device)?;
        self.targets.get(day).map(|row| row[k])
    }

    /// CSV with header `day,device,target_mwh` and 1-based days.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "day,device,target_mwh")?;
        for (d, row) in self.targets.iter().enumerate() {
            for (dev, t) in self.devices.iter().zip(row) {
                writeln!(out, "{},{},{}", d + 1, dev, t)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.write_csv(&mut f).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

/// The window starting on day `d` targets the SOC at the last hour of day `d + 1`,
/// falling back to the final hour near the end of the horizon.
pub fn extract_daily_targets(traj: &SocTrajectory, devices: &[String]) -> Result<DailyTargets> {
    let cols: Vec<usize> = devices
        .iter()
        .map(|d| traj.devices.iter().position(|x| x == d).ok_or_else(|| Error::UnknownDevice(d.clone())))
        .collect::<Result<_>>()?;
    let hours = traj.soc.first().map_or(0, Vec::len);
    let days = hours.div_ceil(24);
    let targets = (0..days)
        .map(|d| {
            let h = (24 * (d + 2) - 1).min(hours - 1);
            cols.iter().map(|&c| traj.soc[c][h]).collect()
        })
        .collect();
    Ok(DailyTargets { devices: devices.to_vec(), targets })
}
