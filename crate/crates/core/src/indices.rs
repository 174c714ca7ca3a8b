//! Mobility, COVID and price indices.
//!
//! Every index is the same pipeline: a raw dated series (driving trend, flight
//! counts, case counts, spot price), optionally averaged to Monday–Sunday weeks,
//! then z-scored with the sample mean and sample standard deviation (n - 1
//! denominator) over a fixed window. The constants used are kept on the result
//! so a normalized value can always be mapped back.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TemporalNetwork;
use crate::ingest::SeriesObservation;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("series `{0}` needs at least two observations to normalize")]
    TooShort(String),
    #[error("series `{0}` is constant; its standard deviation is zero")]
    Constant(String),
    #[error("series `{name}`: {message}")]
    Invalid { name: String, message: String },
    #[error("aligned series share no dates")]
    EmptyIntersection,
    #[error("no series to align")]
    NothingToAlign,
    #[error("empty date window {0} .. {1}")]
    EmptyWindow(NaiveDate, NaiveDate),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    DrivingTrend,
    AirMobility,
    CovidCount,
    Price,
}

impl IndexKind {
    fn non_negative(self) -> bool {
        matches!(self, IndexKind::AirMobility | IndexKind::CovidCount)
    }
}

/// Inclusive calendar window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateRange { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Anything with a name and strictly increasing dated values.
pub trait DatedSeries {
    fn name(&self) -> &str;
    fn observations(&self) -> &[SeriesObservation];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RawIndexSeries {
    pub kind: IndexKind,
    pub name: String,
    observations: Vec<SeriesObservation>,
}

impl RawIndexSeries {
    pub fn new(
        kind: IndexKind,
        name: impl Into<String>,
        observations: Vec<SeriesObservation>,
    ) -> Result<Self, IndexError> {
        let name = name.into();
        let invalid = |message: String| IndexError::Invalid {
            name: name.clone(),
            message,
        };
        for w in observations.windows(2) {
            if w[1].date <= w[0].date {
                return Err(invalid(format!("dates not strictly increasing at {}", w[1].date)));
            }
        }
        for o in &observations {
            if !o.value.is_finite() {
                return Err(invalid(format!("non-finite value on {}", o.date)));
            }
            if kind.non_negative() && o.value < 0.0 {
                return Err(invalid(format!("negative count {} on {}", o.value, o.date)));
            }
        }
        Ok(RawIndexSeries {
            kind,
            name,
            observations,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observations with dates in `window`.
    pub fn restrict(&self, window: DateRange) -> RawIndexSeries {
        RawIndexSeries {
            kind: self.kind,
            name: self.name.clone(),
            observations: self
                .observations
                .iter()
                .filter(|o| window.contains(o.date))
                .copied()
                .collect(),
        }
    }

    /// Re-keys each observation to the Monday starting its week.
    pub fn keyed_by_week_start(&self) -> Result<RawIndexSeries, IndexError> {
        let obs = self
            .observations
            .iter()
            .map(|o| SeriesObservation {
                date: week_start(o.date),
                value: o.value,
            })
            .collect();
        RawIndexSeries::new(self.kind, self.name.clone(), obs)
    }

    /// Keeps only the dates in `dates`.
    pub fn select_dates(&self, dates: &BTreeSet<NaiveDate>) -> RawIndexSeries {
        RawIndexSeries {
            kind: self.kind,
            name: self.name.clone(),
            observations: self
                .observations
                .iter()
                .filter(|o| dates.contains(&o.date))
                .copied()
                .collect(),
        }
    }
}

impl DatedSeries for RawIndexSeries {
    fn name(&self) -> &str {
        &self.name
    }
    fn observations(&self) -> &[SeriesObservation] {
        &self.observations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedSeries {
    pub source_name: String,
    pub mean_used: f64,
    pub sd_used: f64,
    observations: Vec<SeriesObservation>,
}

impl NormalizedSeries {
    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// Maps a raw value onto this series' normalized scale.
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.mean_used) / self.sd_used
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.sd_used + self.mean_used
    }
}

impl DatedSeries for NormalizedSeries {
    fn name(&self) -> &str {
        &self.source_name
    }
    fn observations(&self) -> &[SeriesObservation] {
        &self.observations
    }
}

/// Monday of the Monday–Sunday week containing `d`.
pub fn week_start(d: NaiveDate) -> NaiveDate {
    d - Duration::days(i64::from(d.weekday().num_days_from_monday()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeeklyAverage {
    pub series: RawIndexSeries,
    /// Week-start dates of weeks in the window without any observation.
    pub gaps: Vec<NaiveDate>,
}

/// Mean of the observations in each Monday–Sunday week that intersects `window`.
/// Only observations inside the window contribute; weeks are keyed by their Monday.
pub fn weekly_average(daily: &RawIndexSeries, window: DateRange) -> WeeklyAverage {
    let mut observations = Vec::new();
    let mut gaps = Vec::new();
    if !window.is_empty() {
        let mut buckets: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
        for o in daily.observations.iter().filter(|o| window.contains(o.date)) {
            let e = buckets.entry(week_start(o.date)).or_default();
            e.0 += o.value;
            e.1 += 1;
        }
        let mut week = week_start(window.start);
        while week <= window.end {
            match buckets.get(&week) {
                Some(&(sum, n)) => observations.push(SeriesObservation {
                    date: week,
                    value: sum / n as f64,
                }),
                None => gaps.push(week),
            }
            week += Duration::days(7);
        }
    }
    WeeklyAverage {
        series: RawIndexSeries {
            kind: daily.kind,
            name: daily.name.clone(),
            observations,
        },
        gaps,
    }
}

/// Z-scores a series over its own full window.
pub fn zscore(raw: &RawIndexSeries) -> Result<NormalizedSeries, IndexError> {
    zscore_over(raw, None)
}

/// Z-scores `raw` using the mean and sample sd of the observations inside
/// `window` (all observations when `None`), applied to every observation.
pub fn zscore_over(raw: &RawIndexSeries, window: Option<DateRange>) -> Result<NormalizedSeries, IndexError> {
    let reference: Vec<f64> = raw
        .observations
        .iter()
        .filter(|o| window.is_none_or(|w| w.contains(o.date)))
        .map(|o| o.value)
        .collect();
    if reference.len() < 2 {
        return Err(IndexError::TooShort(raw.name.clone()));
    }
    let mean = stats::mean(&reference);
    let sd = stats::sample_sd(&reference);
    // Relative test: a constant series can leave rounding noise in the sd.
    if sd.is_nan() || sd <= 1e-13 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err(IndexError::Constant(raw.name.clone()));
    }
    Ok(NormalizedSeries {
        source_name: raw.name.clone(),
        mean_used: mean,
        sd_used: sd,
        observations: raw
            .observations
            .iter()
            .map(|o| SeriesObservation {
                date: o.date,
                value: (o.value - mean) / sd,
            })
            .collect(),
    })
}

/// Edge count of each snapshot, dated by the snapshot day.
pub fn air_mobility_index(network: &TemporalNetwork) -> RawIndexSeries {
    RawIndexSeries {
        kind: IndexKind::AirMobility,
        name: "AMI".into(),
        observations: network
            .snapshots()
            .iter()
            .map(|s| SeriesObservation {
                date: s.timestamp,
                value: s.edge_count() as f64,
            })
            .collect(),
    }
}

/// Inner join of several series on date.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignTable {
    pub columns: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `rows[i][j]` is series `j` on `dates[i]`.
    pub rows: Vec<Vec<f64>>,
    /// Dates present in some but not all series.
    pub dropped: Vec<NaiveDate>,
}

impl DesignTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn align<S: DatedSeries>(series: &[S]) -> Result<DesignTable, IndexError> {
    if series.is_empty() {
        return Err(IndexError::NothingToAlign);
    }
    let maps: Vec<BTreeMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| s.observations().iter().map(|o| (o.date, o.value)).collect())
        .collect();
    let all: BTreeSet<NaiveDate> = maps.iter().flat_map(|m| m.keys().copied()).collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for d in all {
        let row: Option<Vec<f64>> = maps.iter().map(|m| m.get(&d).copied()).collect();
        match row {
            Some(r) => {
                dates.push(d);
                rows.push(r);
            }
            None => dropped.push(d),
        }
    }
    if rows.is_empty() {
        return Err(IndexError::EmptyIntersection);
    }
    Ok(DesignTable {
        columns: series.iter().map(|s| s.name().to_string()).collect(),
        dates,
        rows,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_temporal_network, Granularity};
    use crate::ingest::FlightRecord;
    use crate::par::Execution;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn series(kind: IndexKind, start: NaiveDate, values: &[f64]) -> RawIndexSeries {
        let obs = values
            .iter()
            .enumerate()
            .map(|(i, &v)| SeriesObservation {
                date: start + Duration::days(i as i64),
                value: v,
            })
            .collect();
        RawIndexSeries::new(kind, "x", obs).unwrap()
    }

    #[test]
    fn weekly_average_cases() {
        // 2020-01-13 is a Monday.
        let monday = d(2020, 1, 13);
        let week = DateRange::new(monday, d(2020, 1, 19));
        let c = weekly_average(&series(IndexKind::Price, monday, &[4.5; 7]), week);
        assert_eq!(c.series.values(), vec![4.5]);
        assert_eq!(c.series.observations()[0].date, monday);

        let s = series(IndexKind::Price, monday, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(weekly_average(&s, week).series.values(), vec![4.0]);

        let empty = DateRange::new(d(2020, 1, 20), d(2020, 1, 19));
        assert!(weekly_average(&s, empty).series.is_empty());
    }

    #[test]
    fn weekly_average_reports_gaps() {
        let monday = d(2020, 1, 13);
        let s = series(IndexKind::Price, monday, &[1.0, 2.0]);
        let w = weekly_average(&s, DateRange::new(monday, d(2020, 1, 28)));
        assert_eq!(w.series.len(), 1);
        assert_eq!(w.gaps, vec![d(2020, 1, 20), d(2020, 1, 27)]);
    }

    #[test]
    fn zscore_examples() {
        let z = zscore(&series(IndexKind::Price, d(2020, 1, 1), &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.values(), vec![-1.0, 0.0, 1.0]);

        let z = zscore(&series(IndexKind::Price, d(2020, 1, 1), &[10.0, 20.0, 40.0, 50.0])).unwrap();
        let sd = (1000.0f64 / 3.0).sqrt();
        assert_eq!(z.mean_used, 30.0);
        assert!((z.sd_used - sd).abs() < 1e-12);
        for (got, raw) in z.values().iter().zip([10.0, 20.0, 40.0, 50.0]) {
            assert!((got - (raw - 30.0) / sd).abs() < 1e-14);
        }
        assert!((z.denormalize(z.normalize(17.0)) - 17.0).abs() < 1e-12);
    }

    #[test]
    fn zscore_errors() {
        assert_eq!(
            zscore(&series(IndexKind::Price, d(2020, 1, 1), &[3.0, 3.0, 3.0])),
            Err(IndexError::Constant("x".into()))
        );
        assert_eq!(
            zscore(&series(IndexKind::Price, d(2020, 1, 1), &[3.0])),
            Err(IndexError::TooShort("x".into()))
        );
    }

    #[test]
    fn zscore_over_subwindow() {
        let s = series(IndexKind::Price, d(2020, 1, 1), &[1.0, 2.0, 3.0, 100.0]);
        let z = zscore_over(&s, Some(DateRange::new(d(2020, 1, 1), d(2020, 1, 3)))).unwrap();
        assert_eq!(z.mean_used, 2.0);
        assert_eq!(z.values()[3], 98.0);
    }

    #[test]
    fn raw_series_invariants() {
        let obs = vec![
            SeriesObservation { date: d(2020, 1, 2), value: 1.0 },
            SeriesObservation { date: d(2020, 1, 1), value: 1.0 },
        ];
        assert!(RawIndexSeries::new(IndexKind::Price, "p", obs).is_err());
        let neg = vec![SeriesObservation { date: d(2020, 1, 1), value: -1.0 }];
        assert!(RawIndexSeries::new(IndexKind::CovidCount, "c", neg.clone()).is_err());
        assert!(RawIndexSeries::new(IndexKind::DrivingTrend, "h", neg).is_ok());
    }

    #[test]
    fn air_mobility_counts_legs() {
        let sun = d(2020, 2, 2);
        let flights = vec![
            FlightRecord::new("A", "B", sun).unwrap(),
            FlightRecord::new("B", "A", sun).unwrap(),
            FlightRecord::new("A", "C", sun).unwrap(),
        ];
        let net = build_temporal_network(&flights, &[sun], Granularity::Weekly, Execution::Sequential).unwrap();
        let ami = air_mobility_index(&net);
        assert_eq!(ami.values(), vec![3.0]);
        assert_eq!(ami.observations()[0].date, sun);
        let empty = build_temporal_network(&[], &[], Granularity::Weekly, Execution::Sequential).unwrap();
        assert!(air_mobility_index(&empty).is_empty());
        assert_eq!(ami.keyed_by_week_start().unwrap().observations()[0].date, d(2020, 1, 27));
    }

    #[test]
    fn align_cases() {
        let a = series(IndexKind::Price, d(2020, 1, 1), &[1.0, 2.0, 3.0]);
        let b = series(IndexKind::Price, d(2020, 1, 1), &[4.0, 5.0, 6.0]);
        assert_eq!(align(&[a.clone(), b]).unwrap().len(), 3);

        let shifted = series(IndexKind::Price, d(2020, 1, 2), &[4.0, 5.0, 6.0]);
        let t = align(&[a.clone(), shifted]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dropped, vec![d(2020, 1, 1), d(2020, 1, 4)]);
        assert_eq!(t.rows[0], vec![2.0, 4.0]);

        let far = series(IndexKind::Price, d(2021, 1, 1), &[1.0]);
        assert_eq!(align(&[a, far]), Err(IndexError::EmptyIntersection));
        assert_eq!(align::<RawIndexSeries>(&[]), Err(IndexError::NothingToAlign));
    }

    #[test]
    fn align_three_with_common_core() {
        let base = d(2020, 3, 1);
        let a = series(IndexKind::Price, base - Duration::days(5), &[1.0; 35]);
        let b = series(IndexKind::Price, base, &[2.0; 40]);
        let c = series(IndexKind::Price, base - Duration::days(2), &[3.0; 32]);
        // common core: base .. base+29
        assert_eq!(align(&[a, b, c]).unwrap().len(), 30);
    }
}
