//! Airline mobility networks, normalized mobility and price indices, linear
//! quantile regression, and stationary / non-stationary GEV models for block
//! minima of a price series.
//!
//! The modules follow the analysis pipeline:
//!
//! * [`ingest`]: flight records, airport registry and dated series from delimited text
//! * [`graph`]: daily flight multigraphs sampled weekly (Sundays) or monthly (the 15th)
//! * [`indices`]: weekly averaging, z-scores, air mobility index, date alignment
//! * [`quantreg`]: pinball-loss regression with pseudo R² and bootstrap errors
//! * [`evt`]: GEV likelihood fits, model selection, return levels, diagnostics
//!
//! Fan-out work (bootstrap, restarts, per-model fits) runs through
//! [`par::Execution`], backed by rayon when the `parallel` feature is on.

pub mod evt;
pub mod graph;
pub mod indices;
pub mod ingest;
pub mod optim;
pub mod par;
pub mod quantreg;
pub mod rng;
pub mod stats;

pub use par::Execution;
