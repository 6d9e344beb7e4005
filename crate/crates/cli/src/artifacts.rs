//! Files written for one strategy run.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use ldes_core::audit::audit_schedule;
use ldes_core::engine::{run_strategy, AnnualResult, StrategyKind, StrategySpec};
use ldes_core::io::write_schedule_csv;
use ldes_core::metrics::{metrics_report, MetricsReport};
use ldes_core::ucd::FormulationOptions;
use ldes_core::{Error, PowerSystem};
use ldes_milp::SolverOptions;
use serde::Serialize;

use crate::config::ScenarioConfig;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io { path: path.to_path_buf(), source: e.into() }
}

#[derive(Serialize)]
struct WindowRow {
    window: usize,
    start_hour: usize,
    commit_hours: usize,
    lookahead_hours: usize,
    status: String,
    objective: f64,
    gap: f64,
    nodes: usize,
    simplex_iterations: usize,
    wall_s: f64,
    ev_rebate: f64,
    evt_penalty: f64,
    evt_shortfall_mwh: f64,
}

fn write_windows(path: &Path, result: &AnnualResult) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in &result.windows {
        w.serialize(WindowRow {
            window: r.index,
            start_hour: r.start_hour + 1,
            commit_hours: r.commit_hours,
            lookahead_hours: r.lookahead_hours,
            status: r.status.to_string(),
            objective: r.objective,
            gap: r.gap,
            nodes: r.nodes,
            simplex_iterations: r.simplex_iterations,
            wall_s: r.wall_time,
            ev_rebate: r.ev_rebate,
            evt_penalty: r.evt_penalty,
            evt_shortfall_mwh: r.evt.iter().map(|e| (e.target - e.achieved).abs()).fold(0.0, |a, b| a + b),
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_forecast(path: &Path, sys: &PowerSystem) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["hour", "unit", "actual_mw", "forecast_mw"]).map_err(csv_err(path))?;
    for h in 0..sys.horizon_hours {
        for u in &sys.vre {
            w.write_record([
                (h + 1).to_string(),
                u.id.clone(),
                u.available_mw(h).to_string(),
                u.forecast_mw(h).to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Runs one strategy and writes its artifacts into `dir`.
pub fn run_to_dir(
    sys: &PowerSystem,
    spec: &StrategySpec,
    cfg: &ScenarioConfig,
    form: &FormulationOptions,
    solver: &SolverOptions,
    dir: &Path,
) -> Result<MetricsReport, Error> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    log::info!("running {} over {} h into {}", spec.label, sys.horizon_hours, dir.display());
    let result = run_strategy(sys, spec, form, solver)?;
    let report = metrics_report(sys, &result)?;

    write_schedule_csv(sys, &result.schedule, create(&dir.join("schedule.csv"))?)?;
    write_text(&dir.join("metrics.json"), &report.to_json())?;
    write_text(&dir.join("metrics.csv"), &format!("{}\n{}\n", report.csv_header(), report.csv_row()))?;
    write_text(
        &dir.join("timing.json"),
        &(serde_json::to_string_pretty(&report.timing).expect("timing serializes") + "\n"),
    )?;
    write_windows(&dir.join("windows.csv"), &result)?;
    if cfg.forecast_error.is_some() {
        write_forecast(&dir.join("forecast.csv"), sys)?;
    }
    write_text(
        &dir.join("config.json"),
        &(serde_json::to_string_pretty(cfg).expect("config serializes") + "\n"),
    )?;

    let audit = audit_schedule(sys, &result.schedule);
    let mut log = String::new();
    let _ = writeln!(log, "strategy={} fingerprint={} hours={}", spec.label, result.fingerprint, sys.horizon_hours);
    if let Some(t) = result.mt_wall_time {
        let _ = writeln!(log, "mt wall_s={t:.3}");
    }
    for w in &result.windows {
        let _ = writeln!(log, "{}", w.log_line());
        for e in &w.evt {
            let _ = writeln!(log, "  evt device={} hour={} target={:.6} achieved={:.6}", e.device, e.hour, e.target, e.achieved);
        }
    }
    let _ = writeln!(
        log,
        "audit balance={:.3e} soc_recursion={:.3e} exclusivity={:.3e} headroom={:.3e} commitment={:.3e} network={:.3e} worst={:.3e}",
        audit.balance,
        audit.soc_recursion,
        audit.exclusivity,
        audit.storage_headroom,
        audit.commitment,
        audit.network,
        audit.worst()
    );
    let _ = writeln!(
        log,
        "production_cost={:.6} total_wall_s={:.3} mean_window_s={:.3}",
        report.production_cost.total, report.timing.total_wall_s, report.timing.mean_window_s
    );
    write_text(&dir.join("run.log"), &log)?;

    // the relaxed ideal run is allowed fractional commitment and simultaneous charge/discharge
    if spec.kind != StrategyKind::IdLp && !audit.passes(1e-6) {
        log::warn!("{}: schedule audit worst residual {:.3e}", spec.label, audit.worst());
    }
    log::info!("{}: production cost {:.2}, {} windows", spec.label, report.production_cost.total, report.windows);
    Ok(report)
}
