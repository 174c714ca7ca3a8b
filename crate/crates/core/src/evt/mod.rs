//! Extreme value models for block minima.
//!
//! Minima are handled through the identity `min Y = -max(-Y)`: a minima
//! series is negated, a GEV model is fitted to the resulting maxima, and
//! return levels are negated back onto the original scale. Fitted parameters
//! always describe the maxima-oriented variable.

mod blocks;
mod diagnostics;
mod distribution;
mod fit;
mod model;
mod return_level;
mod selection;

use thiserror::Error;

pub use blocks::{
    block_minima, negate, Block, BlockMinima, BlockSeries, CovariateScale, Orientation, YearMonth, TIME_INDEX,
};
pub use diagnostics::{
    diagnostics, gumbel_plotting_positions, gumbel_residual, DensityPoint, DiagnosticBundle, HistogramBin, QqPoint,
    DENSITY_GRID_POINTS,
};
pub use distribution::{gev_cdf, gev_pdf, gev_quantile, gev_sample, gev_sf, gumbel_density, gumbel_quantile, XI_TOL};
pub use fit::{fit_gev, GevFit, GevFitOptions, OptimizerReport};
pub use model::{negative_log_likelihood, GevParams, GevSpec, SUPPORT_PENALTY};
pub use return_level::{exceedance_probability, return_level, return_level_curve, ReturnLevelResult};
pub use selection::{model_selection, ModelTable, SelectionRow};

#[derive(Debug, Error, PartialEq)]
pub enum EvtError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("return period must exceed 1, got {0}")]
    InvalidReturnPeriod(f64),
    #[error("invalid block series: {0}")]
    InvalidBlocks(String),
    #[error("operation requires a minima-oriented series")]
    NotMinima,
    #[error("operation requires a maxima-oriented series")]
    NotMaxima,
    #[error("covariate `{0}` is not present in the block series")]
    UnknownCovariate(String),
    #[error("model `{0}` has shape covariates; only a constant shape is supported")]
    UnsupportedShapeTerms(String),
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("scenario is missing covariate `{0}`")]
    IncompleteScenario(String),
    #[error("{have} blocks are too few; this model needs at least {need}")]
    InsufficientBlocks { have: usize, need: usize },
    #[error("model `{model}` did not converge ({evaluations} evaluations, objective {value})")]
    NoConvergence {
        model: String,
        evaluations: usize,
        value: f64,
    },
    #[error("model `{0}` is not converged")]
    NotConverged(String),
    #[error("block {0} lies outside the fitted support")]
    SupportViolation(String),
}
