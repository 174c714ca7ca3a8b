//! Goodness-of-fit data for fitted GEV models.
//!
//! Each block is mapped to a standard Gumbel residual
//! `eps = log(1 + xi (z - mu(t)) / sigma(t)) / xi` (or `(z - mu) / sigma` in the
//! Gumbel limit). Sorted residuals against Gumbel plotting positions give the
//! Q-Q plot; a histogram of residuals against the Gumbel density gives the
//! density comparison.

use serde::Serialize;

use super::distribution::{gumbel_density, gumbel_quantile, XI_TOL};
use super::fit::GevFit;
use super::EvtError;

pub const DENSITY_GRID_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub empirical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `count / (n * width)`.
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityPoint {
    pub x: f64,
    pub model_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticBundle {
    pub model: String,
    pub residuals: Vec<f64>,
    pub qq: Vec<QqPoint>,
    pub histogram: Vec<HistogramBin>,
    pub density: Vec<DensityPoint>,
}

/// Standard Gumbel residual for one observation (maxima scale).
pub fn gumbel_residual(z: f64, mu: f64, sigma: f64, xi: f64) -> Option<f64> {
    let y = (z - mu) / sigma;
    if xi.abs() < XI_TOL {
        return Some(y);
    }
    let xy = xi * y;
    (xy > -1.0).then(|| xy.ln_1p() / xi)
}

/// `-log(-log(i / (n + 1)))` for `i = 1..=n`.
pub fn gumbel_plotting_positions(n: usize) -> Vec<f64> {
    (1..=n).map(|i| gumbel_quantile(i as f64 / (n + 1) as f64)).collect()
}

pub fn diagnostics(fit: &GevFit) -> Result<DiagnosticBundle, EvtError> {
    if !fit.optimizer.converged {
        return Err(EvtError::NotConverged(fit.spec.name.clone()));
    }
    let xi = fit.params.xi();
    let residuals = fit
        .data
        .blocks()
        .iter()
        .map(|b| {
            let (mu, sigma) = fit.params.location_scale(&fit.spec, &b.covariates)?;
            gumbel_residual(b.extremum, mu, sigma, xi).ok_or_else(|| EvtError::SupportViolation(b.label.to_string()))
        })
        .collect::<Result<Vec<f64>, EvtError>>()?;
    Ok(bundle(&fit.spec.name, residuals))
}

pub(crate) fn bundle(model: &str, residuals: Vec<f64>) -> DiagnosticBundle {
    let n = residuals.len();
    let mut sorted = residuals.clone();
    sorted.sort_by(f64::total_cmp);
    let qq = gumbel_plotting_positions(n)
        .into_iter()
        .zip(&sorted)
        .map(|(theoretical, &empirical)| QqPoint { theoretical, empirical })
        .collect();

    let (lo, hi) = (sorted[0], sorted[n - 1]);
    // Sturges' rule.
    let bins = ((n as f64).log2().ceil() as usize + 1).max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &r in &sorted {
        let i = (((r - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: lo + i as f64 * width,
            upper: lo + (i + 1) as f64 * width,
            count,
            density: count as f64 / (n as f64 * width),
        })
        .collect();

    let (g_lo, g_hi) = (lo.min(-2.0) - 0.5, hi.max(5.0) + 0.5);
    let density = (0..DENSITY_GRID_POINTS)
        .map(|i| {
            let x = g_lo + (g_hi - g_lo) * i as f64 / (DENSITY_GRID_POINTS - 1) as f64;
            DensityPoint {
                x,
                model_density: gumbel_density(x),
            }
        })
        .collect();

    DiagnosticBundle {
        model: model.to_string(),
        residuals,
        qq,
        histogram,
        density,
    }
}
