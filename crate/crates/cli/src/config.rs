//! Pipeline configuration, read from a TOML file.
//!
//! Relative input paths resolve against the directory holding the config
//! file. Every table rejects unknown keys so typos surface as errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use mobility_extremes::evt::{CovariateScale, GevSpec, TIME_INDEX};
use mobility_extremes::indices::DateRange;
use mobility_extremes::ingest::{AirportSchema, FlightSchema, ParseMode, SeriesSchema};

use crate::error::CliError;

/// Weekly index names understood by the indices stage.
pub const PRICE: &str = "P";
pub const DRIVING: &str = "H";
pub const AIR_WEEKLY: &str = "K_w";
pub const AIR_MONTHLY: &str = "K_m";
pub const COVID_PREFIX: &str = "O_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    #[serde(deserialize_with = "date")]
    pub start: NaiveDate,
    #[serde(deserialize_with = "date")]
    pub end: NaiveDate,
}

/// Accepts both a bare TOML date (`2020-01-13`) and a quoted one.
fn date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Toml(toml::value::Datetime),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Text(s) => s,
        Raw::Toml(t) => t.to_string(),
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(|e| serde::de::Error::custom(format!("date {text:?}: {e}")))
}

impl Window {
    pub fn range(&self) -> DateRange {
        DateRange::new(self.start, self.end)
    }
}

fn weekly_window() -> Window {
    Window {
        start: NaiveDate::from_ymd_opt(2020, 1, 13).expect("valid date"),
        end: NaiveDate::from_ymd_opt(2020, 8, 25).expect("valid date"),
    }
}

fn monthly_window() -> Window {
    Window {
        start: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
        end: NaiveDate::from_ymd_opt(2020, 8, 31).expect("valid date"),
    }
}

fn price_schema() -> SeriesSchema {
    SeriesSchema::default().with_value("price")
}

fn mobility_schema() -> SeriesSchema {
    SeriesSchema::default().with_value("driving")
}

fn covid_columns() -> Vec<String> {
    vec!["new_cases".into(), "new_deaths".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub flights: Option<PathBuf>,
    pub airports: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub mobility: Option<PathBuf>,
    pub covid: Option<PathBuf>,
    #[serde(default)]
    pub mode: ParseMode,
    #[serde(default)]
    pub flight_schema: FlightSchema,
    #[serde(default)]
    pub airport_schema: AirportSchema,
    #[serde(default = "price_schema")]
    pub price_schema: SeriesSchema,
    #[serde(default = "mobility_schema")]
    pub mobility_schema: SeriesSchema,
    /// Only the date column and format are used; values come from `covid_columns`.
    #[serde(default)]
    pub covid_schema: SeriesSchema,
    #[serde(default = "covid_columns")]
    pub covid_columns: Vec<String>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "yes")]
    pub weekly: bool,
    #[serde(default = "yes")]
    pub monthly: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            weekly: true,
            monthly: true,
        }
    }
}

fn default_weekly_indices() -> Vec<String> {
    vec![PRICE.into(), DRIVING.into(), AIR_WEEKLY.into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicesConfig {
    /// Any of `P`, `H`, `K_w`, or `O_<column>` for a configured COVID column.
    #[serde(default = "default_weekly_indices")]
    pub weekly: Vec<String>,
    /// Dates whose mean and sd define the weekly z-scores; the aligned weeks when absent.
    pub normalization_window: Option<Window>,
}

impl Default for IndicesConfig {
    fn default() -> Self {
        IndicesConfig {
            weekly: default_weekly_indices(),
            normalization_window: None,
        }
    }
}

fn default_taus() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.5, 0.9, 0.95, 0.99]
}

fn default_replicates() -> usize {
    1000
}

fn default_response() -> String {
    PRICE.into()
}

fn default_covariates() -> Vec<String> {
    vec![DRIVING.into(), AIR_WEEKLY.into()]
}

fn default_line_points() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantregConfig {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub bootstrap_replicates: usize,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default = "default_covariates")]
    pub covariates: Vec<String>,
    /// Grid size of each fitted line in `lines.csv`.
    #[serde(default = "default_line_points")]
    pub line_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub location: Vec<String>,
    #[serde(default)]
    pub logscale: Vec<String>,
}

impl ModelConfig {
    pub fn spec(&self) -> GevSpec {
        let loc: Vec<&str> = self.location.iter().map(String::as_str).collect();
        let scale: Vec<&str> = self.logscale.iter().map(String::as_str).collect();
        GevSpec::new(&self.name, &loc, &scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: String,
    pub return_periods: Vec<f64>,
    #[serde(default)]
    pub covariates: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            r_min: 2.0,
            r_max: 100.0,
            points: 50,
        }
    }
}

fn default_restarts() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleChoice {
    Raw,
    Normalized,
}

impl ScaleChoice {
    pub fn scale(&self) -> CovariateScale {
        match self {
            ScaleChoice::Raw => CovariateScale::Raw,
            ScaleChoice::Normalized => CovariateScale::Normalized,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GevConfig {
    /// Whether `K_m` enters as raw edge counts or z-scores.
    #[serde(default = "raw_scale")]
    pub covariate_scale: ScaleChoice,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub curve: CurveConfig,
}

fn raw_scale() -> ScaleChoice {
    ScaleChoice::Raw
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default = "weekly_window")]
    pub window: Window,
    #[serde(default = "monthly_window")]
    pub monthly_window: Window,
    pub inputs: Inputs,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub indices: IndicesConfig,
    pub quantreg: Option<QuantregConfig>,
    pub gev: Option<GevConfig>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |path: &str, message: String| Err(CliError::Config(format!("{path}: {message}")));
        for (path, w) in [("window", &self.window), ("monthly_window", &self.monthly_window)] {
            if w.start >= w.end {
                return fail(path, format!("start {} must precede end {}", w.start, w.end));
            }
        }
        if let Some(w) = &self.indices.normalization_window {
            if w.start >= w.end {
                return fail(
                    "indices.normalization_window",
                    format!("start {} must precede end {}", w.start, w.end),
                );
            }
        }
        for (i, name) in self.indices.weekly.iter().enumerate() {
            let known = [PRICE, DRIVING, AIR_WEEKLY].contains(&name.as_str())
                || name
                    .strip_prefix(COVID_PREFIX)
                    .is_some_and(|c| self.inputs.covid_columns.iter().any(|k| k == c));
            if !known {
                return fail(
                    &format!("indices.weekly[{i}]"),
                    format!("unknown index `{name}`; expected P, H, K_w or O_<covid column>"),
                );
            }
            if self.indices.weekly[..i].contains(name) {
                return fail(&format!("indices.weekly[{i}]"), format!("duplicate index `{name}`"));
            }
        }
        if let Some(q) = &self.quantreg {
            if q.taus.is_empty() {
                return fail("quantreg.taus", "at least one tau is required".into());
            }
            for (i, &t) in q.taus.iter().enumerate() {
                if !(t > 0.0 && t < 1.0) {
                    return fail(&format!("quantreg.taus[{i}]"), format!("{t} is outside (0, 1)"));
                }
            }
            for (path, name) in std::iter::once(("quantreg.response".to_string(), &q.response)).chain(
                q.covariates
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (format!("quantreg.covariates[{i}]"), c)),
            ) {
                if !self.indices.weekly.contains(name) {
                    return fail(&path, format!("`{name}` is not listed in indices.weekly"));
                }
            }
            if q.covariates.contains(&q.response) {
                return fail("quantreg.covariates", format!("response `{}` cannot be a covariate", q.response));
            }
            if q.line_points < 2 {
                return fail("quantreg.line_points", "must be at least 2".into());
            }
        }
        if let Some(g) = &self.gev {
            let allowed = [TIME_INDEX, AIR_MONTHLY];
            let mut names = std::collections::BTreeSet::new();
            for (i, m) in g.models.iter().enumerate() {
                if m.name.trim().is_empty() {
                    return fail(&format!("gev.models[{i}].name"), "must not be empty".into());
                }
                if !names.insert(m.name.as_str()) {
                    return fail(&format!("gev.models[{i}].name"), format!("duplicate model `{}`", m.name));
                }
                for (side, terms) in [("location", &m.location), ("logscale", &m.logscale)] {
                    for (j, term) in terms.iter().enumerate() {
                        if !allowed.contains(&term.as_str()) {
                            return fail(
                                &format!("gev.models[{i}].{side}[{j}]"),
                                format!("unknown covariate `{term}`; expected t or K_m"),
                            );
                        }
                        if terms[..j].contains(term) {
                            return fail(&format!("gev.models[{i}].{side}[{j}]"), format!("duplicate term `{term}`"));
                        }
                    }
                }
            }
            for (i, s) in g.scenarios.iter().enumerate() {
                if s.return_periods.is_empty() {
                    return fail(&format!("gev.scenarios[{i}].return_periods"), "must not be empty".into());
                }
                for (j, &r) in s.return_periods.iter().enumerate() {
                    if !(r > 1.0 && r.is_finite()) {
                        return fail(&format!("gev.scenarios[{i}].return_periods[{j}]"), format!("{r} must exceed 1"));
                    }
                }
                for (name, v) in &s.covariates {
                    if !allowed.contains(&name.as_str()) {
                        return fail(&format!("gev.scenarios[{i}].covariates.{name}"), "unknown covariate".into());
                    }
                    if !v.is_finite() {
                        return fail(&format!("gev.scenarios[{i}].covariates.{name}"), "must be finite".into());
                    }
                }
            }
            let c = &g.curve;
            if !(c.r_min > 1.0 && c.r_max > c.r_min && c.r_max.is_finite()) || c.points < 2 {
                return fail("gev.curve", "need 1 < r_min < r_max and at least 2 points".into());
            }
        }
        Ok(())
    }
}
