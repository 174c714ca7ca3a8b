use std::collections::BTreeMap;

use serde::Serialize;

use super::blocks::Orientation;
use super::distribution::{gev_sf, XI_TOL};
use super::fit::GevFit;
use super::EvtError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnLevelResult {
    pub model: String,
    pub return_period: f64,
    pub scenario: BTreeMap<String, f64>,
    /// On the scale of the data passed to the fit (price units for minima).
    pub level: f64,
}

/// Level exceeded on average once every `r` blocks-per-period, evaluated at the
/// scenario's covariates. For minima fits this is the level fallen below.
pub fn return_level(fit: &GevFit, r: f64, scenario: &BTreeMap<String, f64>) -> Result<ReturnLevelResult, EvtError> {
    if !r.is_finite() || r <= 1.0 {
        return Err(EvtError::InvalidReturnPeriod(r));
    }
    let (mu, sigma, xi) = fit.parameters_at(scenario)?;
    // -log(1 - 1/r), accurate for large r.
    let y = -(-1.0 / r).ln_1p();
    let z = if xi.abs() < XI_TOL {
        mu - sigma * y.ln()
    } else {
        mu + sigma / xi * (y.powf(-xi) - 1.0)
    };
    Ok(ReturnLevelResult {
        model: fit.spec.name.clone(),
        return_period: r,
        scenario: scenario.clone(),
        level: match fit.orientation {
            Orientation::Maxima => z,
            Orientation::Minima => -z,
        },
    })
}

/// `P(Z > z)` for maxima fits; `P(Y < z)` for minima fits.
pub fn exceedance_probability(fit: &GevFit, z: f64, scenario: &BTreeMap<String, f64>) -> Result<f64, EvtError> {
    let (mu, sigma, xi) = fit.parameters_at(scenario)?;
    let on_maxima_scale = match fit.orientation {
        Orientation::Maxima => z,
        Orientation::Minima => -z,
    };
    gev_sf(on_maxima_scale, mu, sigma, xi)
}

/// `(r, level)` pairs on `points` log-spaced return periods in `[r_min, r_max]`.
pub fn return_level_curve(
    fit: &GevFit,
    scenario: &BTreeMap<String, f64>,
    r_min: f64,
    r_max: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>, EvtError> {
    if !(r_min > 1.0 && r_max > r_min) || points < 2 {
        return Err(EvtError::InvalidReturnPeriod(r_min));
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..points)
        .map(|i| {
            let r = (a + (b - a) * i as f64 / (points - 1) as f64).exp();
            return_level(fit, r, scenario).map(|rl| (r, rl.level))
        })
        .collect()
}
