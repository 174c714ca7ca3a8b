//! Lazily loaded inputs and intermediate results shared between stages.
//!
//! Each stage asks the context for what it needs; anything computed once
//! (parsed flights, networks, aligned indices) is cached so `run-all` does the
//! work a single time. Warnings raised while loading are attributed to the
//! stage that triggered the load.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use mobility_extremes::graph::{build_temporal_network, Granularity, TemporalNetwork};
use mobility_extremes::indices::{
    air_mobility_index, align, weekly_average, zscore_over, DatedSeries, DesignTable, IndexKind, NormalizedSeries,
    RawIndexSeries,
};
use mobility_extremes::ingest::{
    parse_airports, parse_flights, parse_series, validate_airports, FlightRecord, Parsed, RowError,
    SeriesObservation, SeriesSchema,
};
use mobility_extremes::Execution;

use crate::config::{PipelineConfig, AIR_WEEKLY, COVID_PREFIX, DRIVING, PRICE};
use crate::error::CliError;

/// How many dates a warning spells out before summarizing.
const LISTED: usize = 5;

pub fn list_some<T: std::fmt::Display>(items: &[T]) -> String {
    let shown: Vec<String> = items.iter().take(LISTED).map(T::to_string).collect();
    if items.len() > LISTED {
        format!("{} and {} more", shown.join(", "), items.len() - LISTED)
    } else {
        shown.join(", ")
    }
}

/// Weekly indices: raw weekly series, then z-scores over the aligned weeks.
#[derive(Clone, Debug)]
pub struct WeeklyIndices {
    pub raw: Vec<RawIndexSeries>,
    pub normalized: Vec<NormalizedSeries>,
    /// Aligned z-scores, one column per index.
    pub design: DesignTable,
}

/// Monthly air mobility, raw and z-scored over the monthly window.
#[derive(Clone, Debug)]
pub struct MonthlyAmi {
    pub raw: RawIndexSeries,
    pub normalized: NormalizedSeries,
}

pub struct Context<'a> {
    pub config: &'a PipelineConfig,
    pub execution: Execution,
    warnings: Vec<String>,
    flights: Option<Vec<FlightRecord>>,
    weekly_network: Option<TemporalNetwork>,
    monthly_network: Option<TemporalNetwork>,
    prices: Option<RawIndexSeries>,
    weekly: Option<WeeklyIndices>,
    monthly_ami: Option<MonthlyAmi>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a PipelineConfig, execution: Execution) -> Self {
        Context {
            config,
            execution,
            warnings: Vec::new(),
            flights: None,
            weekly_network: None,
            monthly_network: None,
            prices: None,
            weekly: None,
            monthly_ami: None,
        }
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn input(&self, key: &str, path: &Option<PathBuf>, purpose: &str) -> Result<PathBuf, CliError> {
        match path {
            Some(p) => Ok(self.config.resolve(p)),
            None => Err(CliError::Config(format!("inputs.{key} is required for {purpose}"))),
        }
    }

    fn open(path: &Path, what: &str) -> Result<File, CliError> {
        File::open(path).map_err(|e| CliError::Data(format!("cannot open {what} file {}: {e}", path.display())))
    }

    fn note_rejections(&mut self, what: &str, rejected: &[RowError]) {
        if !rejected.is_empty() {
            let lines: Vec<String> = rejected.iter().map(|r| format!("line {} ({})", r.line, r.message)).collect();
            self.warn(format!("{what}: {} rows rejected: {}", rejected.len(), list_some(&lines)));
        }
    }

    pub fn flights(&mut self) -> Result<&[FlightRecord], CliError> {
        if self.flights.is_none() {
            let config = self.config;
            let inputs = &config.inputs;
            let path = self.input("flights", &inputs.flights, "network construction")?;
            let parsed = parse_flights(Self::open(&path, "flights")?, &inputs.flight_schema, inputs.mode)
                .map_err(|e| CliError::data(path.display(), e))?;
            if parsed.cancelled > 0 {
                self.warn(format!("flights: {} cancelled rows dropped", parsed.cancelled));
            }
            self.note_rejections("flights", &parsed.rejected);
            if parsed.records.is_empty() {
                self.warn("flights: input contains no usable flight records");
            }
            if let Some(airports) = &inputs.airports {
                let apath = self.config.resolve(airports);
                let (registry, rejected) =
                    parse_airports(Self::open(&apath, "airports")?, &inputs.airport_schema, inputs.mode)
                        .map_err(|e| CliError::data(apath.display(), e))?;
                self.note_rejections("airports", &rejected);
                let report = validate_airports(&parsed.records, &registry);
                if !report.is_empty() {
                    let codes: Vec<_> = report.unknown_codes().into_iter().collect();
                    self.warn(format!(
                        "flights: {} records use airports missing from the registry: {}",
                        report.unresolved.len(),
                        list_some(&codes)
                    ));
                }
            }
            self.flights = Some(parsed.records);
        }
        Ok(self.flights.as_deref().expect("loaded above"))
    }

    fn build_network(&mut self, granularity: Granularity) -> Result<TemporalNetwork, CliError> {
        let config = self.config;
        let window = match granularity {
            Granularity::Weekly => &config.window,
            Granularity::Monthly => &config.monthly_window,
        };
        let days = granularity.sample_days(window.start, window.end);
        let execution = self.execution;
        let network = build_temporal_network(self.flights()?, &days, granularity, execution)?;
        let empty: Vec<_> = network
            .snapshots()
            .iter()
            .filter(|s| s.is_empty())
            .map(|s| s.timestamp)
            .collect();
        if !empty.is_empty() {
            let label = match granularity {
                Granularity::Weekly => "weekly",
                Granularity::Monthly => "monthly",
            };
            self.warn(format!(
                "{label} network: {} of {} snapshot days have no flights: {}",
                empty.len(),
                days.len(),
                list_some(&empty)
            ));
        }
        Ok(network)
    }

    pub fn weekly_network(&mut self) -> Result<&TemporalNetwork, CliError> {
        if self.weekly_network.is_none() {
            self.weekly_network = Some(self.build_network(Granularity::Weekly)?);
        }
        Ok(self.weekly_network.as_ref().expect("built above"))
    }

    pub fn monthly_network(&mut self) -> Result<&TemporalNetwork, CliError> {
        if self.monthly_network.is_none() {
            self.monthly_network = Some(self.build_network(Granularity::Monthly)?);
        }
        Ok(self.monthly_network.as_ref().expect("built above"))
    }

    fn series(
        &mut self,
        key: &str,
        path: &Option<PathBuf>,
        schema: &SeriesSchema,
        purpose: &str,
    ) -> Result<Parsed<SeriesObservation>, CliError> {
        let path = self.input(key, path, purpose)?;
        let parsed = parse_series(Self::open(&path, key)?, schema, self.config.inputs.mode)
            .map_err(|e| CliError::data(path.display(), e))?;
        self.note_rejections(key, &parsed.rejected);
        if parsed.records.is_empty() {
            return Err(CliError::Data(format!("{}: no observations", path.display())));
        }
        Ok(parsed)
    }

    /// Daily prices over their full span.
    pub fn prices(&mut self) -> Result<&RawIndexSeries, CliError> {
        if self.prices.is_none() {
            let config = self.config;
            let inputs = &config.inputs;
            let parsed = self.series("prices", &inputs.prices, &inputs.price_schema, "the price index")?;
            self.prices = Some(RawIndexSeries::new(IndexKind::Price, PRICE, parsed.records)?);
        }
        Ok(self.prices.as_ref().expect("loaded above"))
    }

    fn weekly_from_daily(&mut self, daily: &RawIndexSeries) -> RawIndexSeries {
        let averaged = weekly_average(daily, self.config.window.range());
        if !averaged.gaps.is_empty() {
            self.warn(format!(
                "{}: {} weeks without observations: {}",
                daily.name,
                averaged.gaps.len(),
                list_some(&averaged.gaps)
            ));
        }
        averaged.series
    }

    fn weekly_raw(&mut self, name: &str) -> Result<RawIndexSeries, CliError> {
        let config = self.config;
        let inputs = &config.inputs;
        if name == PRICE {
            let daily = self.prices()?.clone();
            return Ok(self.weekly_from_daily(&daily));
        }
        if name == DRIVING {
            let parsed = self.series("mobility", &inputs.mobility, &inputs.mobility_schema, "index H")?;
            let daily = RawIndexSeries::new(IndexKind::DrivingTrend, DRIVING, parsed.records)?;
            return Ok(self.weekly_from_daily(&daily));
        }
        if name == AIR_WEEKLY {
            let ami = air_mobility_index(self.weekly_network()?);
            let keyed = ami.keyed_by_week_start()?;
            return Ok(RawIndexSeries::new(IndexKind::AirMobility, AIR_WEEKLY, keyed.observations().to_vec())?);
        }
        let column = name.strip_prefix(COVID_PREFIX).expect("validated index name");
        let schema = inputs.covid_schema.clone().with_value(column);
        let parsed = self.series("covid", &inputs.covid, &schema, &format!("index {name}"))?;
        let daily = RawIndexSeries::new(IndexKind::CovidCount, name, parsed.records)?;
        Ok(self.weekly_from_daily(&daily))
    }

    pub fn weekly_indices(&mut self) -> Result<&WeeklyIndices, CliError> {
        if self.weekly.is_none() {
            let names = self.config.indices.weekly.clone();
            if names.is_empty() {
                return Err(CliError::Config("indices.weekly lists no indices".into()));
            }
            let raw = names
                .iter()
                .map(|n| self.weekly_raw(n))
                .collect::<Result<Vec<_>, _>>()?;
            let aligned = align(&raw)?;
            if !aligned.dropped.is_empty() {
                self.warn(format!(
                    "indices: {} of {} weeks dropped because some index lacks them: {}",
                    aligned.dropped.len(),
                    aligned.dropped.len() + aligned.dates.len(),
                    list_some(&aligned.dropped)
                ));
            }
            let window = self.config.indices.normalization_window.as_ref().map(|w| w.range());
            let normalized = raw
                .iter()
                .map(|series| {
                    let kept = series.select_dates(&aligned.dates.iter().copied().collect());
                    zscore_over(&kept, window)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let design = align(&normalized)?;
            self.weekly = Some(WeeklyIndices {
                raw,
                normalized,
                design,
            });
        }
        Ok(self.weekly.as_ref().expect("computed above"))
    }

    pub fn monthly_ami(&mut self) -> Result<&MonthlyAmi, CliError> {
        if self.monthly_ami.is_none() {
            if !self.config.network.monthly {
                return Err(CliError::Config(
                    "K_m needs the monthly network, but network.monthly is false".into(),
                ));
            }
            let mut raw = air_mobility_index(self.monthly_network()?);
            raw.name = crate::config::AIR_MONTHLY.into();
            let normalized = zscore_over(&raw, None)?;
            self.monthly_ami = Some(MonthlyAmi { raw, normalized });
        }
        Ok(self.monthly_ami.as_ref().expect("computed above"))
    }
}

/// Value of each observation keyed by calendar month.
pub fn by_month(observations: &[SeriesObservation]) -> BTreeMap<(i32, u32), f64> {
    use chrono::Datelike;
    observations
        .iter()
        .map(|o| ((o.date.year(), o.date.month()), o.value))
        .collect()
}
