//! Scenario configuration: JSON file fields overridden by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ldes_core::engine::{make_strategy, parse_strategy, StrategyKind, StrategySpec, TailMode};
use ldes_core::forecast::{apply_forecast, ForecastSpec};
use ldes_core::ucd::{EvtMode, FormulationOptions, Network};
use ldes_core::{builtin_system, load_system, BuiltinName, Error, PowerSystem, Profile};
use ldes_milp::SolverOptions;
use serde::{Deserialize, Serialize};

/// Every field is optional; unset fields fall back to the config file, then to defaults.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario JSON file whose fields act as defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// System JSON file.
    #[arg(long, conflicts_with = "builtin")]
    pub system: Option<PathBuf>,
    /// Built-in system: mini3 or pjm5like.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Built-in profile: solar or wind.
    #[arg(long)]
    pub profile: Option<String>,
    /// Strategy name, e.g. TR, ID, ID-LP, ELH-3d, EVT-LA, EVT-LA-MT, EV-025.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Look-ahead in days (required by a bare ELH, overrides any rolling strategy).
    #[arg(long)]
    pub lookahead_days: Option<usize>,
    /// Stored-energy value in currency/MWh (required by a bare EV).
    #[arg(long)]
    pub energy_value: Option<f64>,
    /// End-volume target enforcement: soft or hard.
    #[arg(long)]
    pub evt: Option<String>,
    /// Target fraction of energy capacity for EVT-LA.
    #[arg(long)]
    pub evt_fraction: Option<f64>,
    /// Devices that receive end-volume targets (default: every long-duration store).
    #[arg(long, value_delimiter = ',')]
    pub target_devices: Option<Vec<String>>,
    /// Network model: copperplate or nodal.
    #[arg(long)]
    pub network: Option<String>,
    /// Relative MIP gap.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Per-window time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Time limit for the single-window ideal strategies, in seconds.
    #[arg(long)]
    pub ideal_time_limit: Option<f64>,
    /// Last-window handling: clamp or truncate.
    #[arg(long)]
    pub tail: Option<String>,
    /// Forecast error targets, e.g. solar=0.03,wind=0.06.
    #[arg(long)]
    pub forecast_error: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulate only the first N hours.
    #[arg(long)]
    pub hours: Option<usize>,
    /// Fixed initial SOC without cyclic linkage, so ideal and rolling runs share one feasible set.
    #[arg(long)]
    pub comparable: bool,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ScenarioConfig {
    /// Reads `--config` if given and lets the flags win.
    pub fn merged(&self) -> Result<ScenarioConfig, Error> {
        let mut base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
                let mut c: ScenarioConfig = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                // relative paths in the file are relative to the file
                let dir = path.parent().unwrap_or(Path::new("."));
                c.system = c.system.map(|p| dir.join(p));
                c.out = c.out.map(|p| dir.join(p));
                c
            }
            None => ScenarioConfig::default(),
        };
        if self.system.is_some() {
            base.builtin = None;
        }
        if self.builtin.is_some() {
            base.system = None;
        }
        overlay!(base, self; system, builtin, profile, strategy, lookahead_days, energy_value, evt, evt_fraction,
            target_devices, network, gap, time_limit, ideal_time_limit, tail, forecast_error, seed, out, hours);
        base.comparable |= self.comparable;
        base.config = self.config.clone();
        Ok(base)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn forecast(&self) -> Result<Option<ForecastSpec>, Error> {
        self.forecast_error.as_deref().map(|t| ForecastSpec::parse(t, self.seed())).transpose()
    }

    /// System as simulated: shortened to `hours`, with forecasts applied.
    pub fn load_system(&self) -> Result<PowerSystem, Error> {
        let mut sys = self.base_system()?;
        if let Some(h) = self.hours {
            sys = sys.with_horizon(h)?;
        }
        if let Some(spec) = self.forecast()? {
            sys = apply_forecast(&sys, &spec);
        }
        Ok(sys)
    }

    fn base_system(&self) -> Result<PowerSystem, Error> {
        if let Some(path) = &self.system {
            if self.profile.is_some() {
                return Err(Error::Config("--profile only applies to built-in systems".into()));
            }
            return load_system(path);
        }
        let name: BuiltinName = self.builtin.as_deref().unwrap_or("mini3").parse().map_err(Error::Config)?;
        let profile: Profile = self.profile.as_deref().unwrap_or("solar").parse().map_err(Error::Config)?;
        Ok(builtin_system(name, profile))
    }

    pub fn network(&self) -> Result<Network, Error> {
        match self.network.as_deref().unwrap_or("copperplate") {
            "copperplate" | "copper_plate" | "copper-plate" => Ok(Network::CopperPlate),
            "nodal" => Ok(Network::Nodal),
            other => Err(Error::Config(format!("unknown network {other:?} (expected copperplate or nodal)"))),
        }
    }

    pub fn formulation(&self) -> Result<FormulationOptions, Error> {
        Ok(FormulationOptions { network: self.network()?, ..FormulationOptions::default() })
    }

    pub fn solver(&self) -> Result<SolverOptions, Error> {
        let mut s = SolverOptions::default();
        if let Some(g) = self.gap {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("gap must be non-negative, got {g}")));
            }
            s.rel_gap = g;
        }
        if let Some(t) = self.time_limit {
            check_limit(t)?;
            s.time_limit = t;
        }
        Ok(s)
    }

    /// Strategy from `--strategy` (default TR) with the remaining flags applied.
    pub fn strategy(&self) -> Result<StrategySpec, Error> {
        self.strategy_named(self.strategy.as_deref().unwrap_or("TR"))
    }

    pub fn strategy_named(&self, label: &str) -> Result<StrategySpec, Error> {
        let mut params = BTreeMap::new();
        let mut spec = if label.eq_ignore_ascii_case("ELH") {
            let days = self
                .lookahead_days
                .ok_or_else(|| Error::Config("strategy ELH needs --lookahead-days".into()))?;
            params.insert("days".to_string(), days as f64);
            make_strategy("ELH", &params)?
        } else if label.eq_ignore_ascii_case("EV") {
            let v = self.energy_value.ok_or_else(|| Error::Config("strategy EV needs --energy-value".into()))?;
            params.insert("value".to_string(), v);
            make_strategy("EV", &params)?
        } else {
            let mut spec = parse_strategy(label)?;
            if let Some(days) = self.lookahead_days {
                if spec.kind.is_ideal() {
                    return Err(Error::Config(format!("{} has no look-ahead window", spec.label)));
                }
                spec.lookahead_hours = 24 * days;
            }
            if let Some(v) = self.energy_value {
                if spec.kind != StrategyKind::Ev {
                    return Err(Error::Config(format!("--energy-value does not apply to {}", spec.label)));
                }
                spec.energy_value = Some(v);
            }
            spec
        };
        if let Some(f) = self.evt_fraction {
            if spec.kind != StrategyKind::EvtLa {
                return Err(Error::Config(format!("--evt-fraction does not apply to {}", spec.label)));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("target fraction must lie in [0, 1], got {f}")));
            }
            spec.evt_fraction = Some(f);
        }
        if let Some(mode) = &self.evt {
            spec.evt_mode = match mode.as_str() {
                "soft" => EvtMode::Soft,
                "hard" => EvtMode::Hard,
                other => return Err(Error::Config(format!("unknown EVT mode {other:?} (expected soft or hard)"))),
            };
        }
        if let Some(devices) = &self.target_devices {
            spec.target_devices = devices.clone();
        }
        if let Some(t) = &self.tail {
            spec.tail = t.parse::<TailMode>()?;
        }
        if let Some(t) = self.time_limit {
            check_limit(t)?;
            spec.per_window_time_limit = t;
        }
        if let Some(t) = self.ideal_time_limit {
            check_limit(t)?;
            spec.ideal_time_limit = t;
        }
        Ok(if self.comparable { spec.comparable() } else { spec })
    }
}

fn check_limit(t: f64) -> Result<(), Error> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("time limit must be positive, got {t}")))
    }
}
