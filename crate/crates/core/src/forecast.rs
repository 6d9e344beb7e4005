//! Synthetic day-ahead VRE forecasts and their error statistics.
//!
//! Errors are independent zero-mean Gaussians scaled so that the expected absolute
//! error equals the requested fraction of capacity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{PowerSystem, VreKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSpec {
    /// Target mean absolute error as a fraction of capacity.
    pub solar: f64,
    pub wind: f64,
    pub seed: u64,
}

impl Default for ForecastSpec {
    fn default() -> Self {
        Self { solar: 0.03, wind: 0.06, seed: 0 }
    }
}

impl ForecastSpec {
    pub fn target(&self, kind: VreKind) -> f64 {
        match kind {
            VreKind::Solar => self.solar,
            VreKind::Wind => self.wind,
        }
    }

    /// Parses `solar=0.03,wind=0.06`; omitted kinds get zero error.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let mut spec = ForecastSpec { solar: 0.0, wind: 0.0, seed };
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("forecast error entry {part:?} is not kind=fraction")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("forecast error {v:?} is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("forecast error {v} must be non-negative")));
            }
            match k.trim() {
                "solar" => spec.solar = v,
                "wind" => spec.wind = v,
                other => return Err(Error::Config(format!("unknown VRE kind {other:?} (expected solar or wind)"))),
            }
        }
        Ok(spec)
    }
}

/// Actual MW plus `capacity * e`, `e ~ N(0, target * sqrt(pi/2))`, clamped to `[0, capacity]`.
/// With `mask_zeros`, hours whose actual output is zero stay at zero.
pub fn perturb_forecast(actual: &[f64], capacity: f64, target: f64, seed: u64, mask_zeros: bool) -> Vec<f64> {
    if target == 0.0 {
        return actual.to_vec();
    }
    let sigma = target * (std::f64::consts::PI / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    actual
        .iter()
        .map(|&a| {
            // draw every hour so the stream does not depend on the mask
            let e = normal.sample(&mut rng);
            if mask_zeros && a == 0.0 {
                0.0
            } else {
                (a + capacity * e).clamp(0.0, capacity)
            }
        })
        .collect()
}

/// Copy of `sys` whose VRE units carry perturbed forecasts derived from their actuals.
pub fn apply_forecast(sys: &PowerSystem, spec: &ForecastSpec) -> PowerSystem {
    let mut out = sys.clone();
    for (i, unit) in out.vre.iter_mut().enumerate() {
        let target = spec.target(unit.kind);
        let actual: Vec<f64> = (0..unit.availability.len()).map(|h| unit.available_mw(h)).collect();
        let unit_seed = spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64 + 1);
        let mw = perturb_forecast(&actual, unit.capacity, target, unit_seed, unit.kind == VreKind::Solar);
        // a zero target must reproduce the actuals exactly, without a MW round trip
        unit.forecast = Some(if unit.capacity > 0.0 && target > 0.0 {
            mw.iter().map(|m| (m / unit.capacity).clamp(0.0, 1.0)).collect()
        } else {
            unit.availability.clone()
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrors {
    pub nrmse: f64,
    pub nmae: f64,
}

pub fn forecast_errors(actual: &[f64], forecast: &[f64], normalizer: f64) -> Result<ForecastErrors> {
    if actual.len() != forecast.len() {
        return Err(Error::LengthMismatch(actual.len(), forecast.len()));
    }
    if !(normalizer > 0.0) {
        return Err(Error::Config(format!("normalizer {normalizer} must be positive")));
    }
    if actual.is_empty() {
        return Ok(ForecastErrors { nrmse: 0.0, nmae: 0.0 });
    }
    let n = actual.len() as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (a, f) in actual.iter().zip(forecast) {
        let e = f - a;
        sq += e * e;
        abs += e.abs();
    }
    Ok(ForecastErrors { nrmse: (sq / n).sqrt() / normalizer, nmae: abs / n / normalizer })
}
