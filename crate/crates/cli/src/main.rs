//! `ldes`: rolling-horizon storage dispatch runs, comparisons and reports.

mod artifacts;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ldes_core::io::parse_system;
use ldes_core::metrics::{compare_runs, comparison_markdown, MetricsReport, Timing};
use ldes_core::mt::{extract_daily_targets, run_mt, MtOptions};
use ldes_core::system::DurationClass;
use ldes_core::{validate_system, Error};
use rayon::prelude::*;

use crate::artifacts::run_to_dir;
use crate::config::ScenarioConfig;

#[derive(Parser)]
#[command(name = "ldes", version, about = "Rolling-horizon unit commitment with long-duration storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy and write its artifacts.
    Run(ScenarioConfig),
    /// Run several strategies on one system and compare them with a baseline.
    Compare(CompareArgs),
    /// Check a system file.
    Validate { path: PathBuf },
    /// Derive daily end-volume targets from the mid-term model.
    MtTargets(MtTargetsArgs),
    /// Collect metrics.json files from run directories into one CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioConfig,
    /// Strategies to run.
    #[arg(long, value_delimiter = ',', default_value = "TR,ID")]
    strategies: Vec<String>,
    #[arg(long, default_value = "TR")]
    baseline: String,
    /// Concurrent runs. Wall times, and so normalized CPU, are only comparable with 1.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MtTargetsArgs {
    #[command(flatten)]
    scenario: ScenarioConfig,
    /// Devices to target (default: every long-duration store).
    #[arg(long, value_delimiter = ',')]
    devices: Option<Vec<String>>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories containing metrics.json.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// CSV file to write instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// 1 for I/O, 2 for configuration or data, 3 for the solver.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::Solve { .. } | Error::Solver(_) | Error::Extract(_) => 3,
        _ => 2,
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn cmd_run(scenario: &ScenarioConfig) -> Result<(), Error> {
    let cfg = scenario.merged()?;
    let spec = cfg.strategy()?;
    let sys = cfg.load_system()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let report = run_to_dir(&sys, &spec, &cfg, &cfg.formulation()?, &cfg.solver()?, &out)?;
    println!("{} production_cost={:.6} out={}", report.strategy, report.production_cost.total, out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    let mut cfg = args.scenario.merged()?;
    // cross-strategy benchmarks always share a fixed initial state
    cfg.comparable = true;
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let sys = cfg.load_system()?;
    let (form, solver) = (cfg.formulation()?, cfg.solver()?);
    let baseline = cfg.strategy_named(&args.baseline)?;
    let mut specs = args.strategies.iter().map(|s| cfg.strategy_named(s)).collect::<Result<Vec<_>, _>>()?;
    if !specs.iter().any(|s| s.label == baseline.label) {
        specs.insert(0, baseline.clone());
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut dirs: Vec<PathBuf> = Vec::new();
    for s in &specs {
        let mut name = s.label.clone();
        let mut k = 2;
        while dirs.contains(&out.join(&name)) {
            name = format!("{}-{k}", s.label);
            k += 1;
        }
        dirs.push(out.join(name));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let reports: Vec<MetricsReport> = pool.install(|| {
        specs
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(spec, dir)| run_to_dir(&sys, spec, &cfg, &form, &solver, dir))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let base = reports.iter().position(|r| r.strategy == baseline.label).expect("baseline is always run");
    let rows = reports.iter().map(|r| compare_runs(&reports[base], r)).collect::<Result<Vec<_>, _>>()?;
    let json = out.join("comparison.json");
    fs::write(&json, serde_json::to_string_pretty(&rows).expect("comparison serializes") + "\n").map_err(io_err(&json))?;
    let md = comparison_markdown(&rows);
    let md_path = out.join("comparison.md");
    fs::write(&md_path, &md).map_err(io_err(&md_path))?;
    print!("{md}");
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<bool, Error> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let sys = parse_system(&text, path.parent().unwrap_or(Path::new(".")))?;
    let violations = validate_system(&sys);
    if violations.is_empty() {
        println!("OK");
        return Ok(true);
    }
    for v in &violations {
        println!("{v}");
    }
    Ok(false)
}

fn cmd_mt_targets(args: &MtTargetsArgs) -> Result<(), Error> {
    let cfg = args.scenario.merged()?;
    let sys = cfg.load_system()?;
    let devices = match &args.devices {
        Some(d) => d.clone(),
        None => sys.storage.iter().filter(|s| s.duration_class == DurationClass::Long).map(|s| s.id.clone()).collect(),
    };
    let traj = run_mt(&sys, &MtOptions { network: cfg.network()?, ..MtOptions::default() }, &cfg.solver()?)?;
    let targets = extract_daily_targets(&traj, &devices)?;
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            targets.save_csv(&dir.join("mt_targets.csv"))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            targets.write_csv(&mut lock).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Error> {
    let mut header: Option<String> = None;
    let mut text = String::new();
    for dir in &args.dirs {
        let path = dir.join("metrics.json");
        let raw = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut report: MetricsReport =
            serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if let Ok(t) = fs::read_to_string(dir.join("timing.json")) {
            report.timing = serde_json::from_str::<Timing>(&t).unwrap_or_default();
        }
        let h = report.csv_header();
        match &header {
            None => {
                text.push_str(&h);
                text.push('\n');
                header = Some(h);
            }
            Some(first) if *first != h => {
                return Err(Error::Config(format!("{} has different columns from the first run", path.display())));
            }
            Some(_) => {}
        }
        text.push_str(&report.csv_row());
        text.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(s) => cmd_run(s),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate { path } => match cmd_validate(path) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::MtTargets(a) => cmd_mt_targets(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
