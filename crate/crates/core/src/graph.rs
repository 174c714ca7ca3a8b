//! Undirected temporal airline networks.
//!
//! A snapshot is the multigraph of all flight legs flown on one day: every leg
//! adds one to the multiplicity of its unordered airport pair, so the edge
//! count is the number of legs and an airport's degree is its number of
//! departures plus landings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AirportCode, FlightRecord};
use crate::par::Execution;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("airport {0} is not in the snapshot")]
    UnknownAirport(AirportCode),
    #[error("snapshot for {0} has no flights")]
    EmptySnapshot(NaiveDate),
    #[error("sample days must be strictly increasing ({0} follows {1})")]
    UnorderedDays(NaiveDate, NaiveDate),
    #[error("{day} is not a valid {granularity:?} sample day")]
    BadSampleDay { day: NaiveDate, granularity: Granularity },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One snapshot per Sunday.
    Weekly,
    /// One snapshot on the 15th of each month.
    Monthly,
}

impl Granularity {
    pub fn accepts(self, day: NaiveDate) -> bool {
        match self {
            Granularity::Weekly => day.weekday() == Weekday::Sun,
            Granularity::Monthly => day.day() == 15,
        }
    }

    /// All sample days in `[start, end]`.
    pub fn sample_days(self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| self.accepts(*d))
            .collect()
    }
}

/// Unordered airport pair, stored with the smaller code first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AirportPair(AirportCode, AirportCode);

impl AirportPair {
    pub fn new(a: AirportCode, b: AirportCode) -> Self {
        if a <= b {
            AirportPair(a, b)
        } else {
            AirportPair(b, a)
        }
    }

    pub fn endpoints(&self) -> (&AirportCode, &AirportCode) {
        (&self.0, &self.1)
    }

    pub fn contains(&self, code: &AirportCode) -> bool {
        &self.0 == code || &self.1 == code
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSnapshot {
    pub timestamp: NaiveDate,
    pub granularity: Granularity,
    nodes: BTreeSet<AirportCode>,
    edges: BTreeMap<AirportPair, u64>,
}

impl NetworkSnapshot {
    pub fn nodes(&self) -> &BTreeSet<AirportCode> {
        &self.nodes
    }

    pub fn edge_multiplicity(&self) -> &BTreeMap<AirportPair, u64> {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The 0/1 adjacency view: pairs with at least one flight.
    pub fn simple_edges(&self) -> BTreeSet<AirportPair> {
        self.edges.keys().cloned().collect()
    }

    pub fn degree(&self, airport: &AirportCode) -> Result<u64, GraphError> {
        if !self.nodes.contains(airport) {
            return Err(GraphError::UnknownAirport(airport.clone()));
        }
        Ok(self
            .edges
            .iter()
            .filter(|(pair, _)| pair.contains(airport))
            .map(|(_, m)| *m)
            .sum())
    }

    /// Degree of every node, in node order.
    pub fn degrees(&self) -> BTreeMap<AirportCode, u64> {
        let mut out: BTreeMap<AirportCode, u64> =
            self.nodes.iter().map(|n| (n.clone(), 0)).collect();
        for (AirportPair(a, b), m) in &self.edges {
            *out.get_mut(a).expect("edge endpoint is a node") += m;
            *out.get_mut(b).expect("edge endpoint is a node") += m;
        }
        out
    }

    pub fn degree_summary(&self) -> Result<DegreeSummary, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptySnapshot(self.timestamp));
        }
        let mut seq: Vec<f64> = self.degrees().values().map(|&d| d as f64).collect();
        seq.sort_by(f64::total_cmp);
        Ok(DegreeSummary {
            min: seq[0],
            q1: stats::quantile_sorted(&seq, 0.25),
            median: stats::quantile_sorted(&seq, 0.5),
            mean: stats::mean(&seq),
            q3: stats::quantile_sorted(&seq, 0.75),
            max: seq[seq.len() - 1],
        })
    }

    /// Fraction of nodes with each realized degree.
    pub fn degree_distribution(&self) -> Result<BTreeMap<u64, f64>, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptySnapshot(self.timestamp));
        }
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for d in self.degrees().into_values() {
            *counts.entry(d).or_default() += 1;
        }
        let n = self.node_count() as f64;
        Ok(counts
            .into_iter()
            .map(|(d, c)| (d, c as f64 / n))
            .collect())
    }

    pub fn summary_row(&self) -> SnapshotSummary {
        SnapshotSummary {
            date: self.timestamp,
            node_count: self.node_count(),
            edge_count: self.edge_count(),
            degrees: self.degree_summary().ok(),
        }
    }
}

/// Six-number summary of a degree sequence; quartiles use linear interpolation
/// between order statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub date: NaiveDate,
    pub node_count: usize,
    pub edge_count: u64,
    /// `None` for a day without flights.
    pub degrees: Option<DegreeSummary>,
}

impl SnapshotSummary {
    pub const HEADER: [&'static str; 9] = [
        "date", "node_count", "edge_count", "min", "q1", "median", "mean", "q3", "max",
    ];

    pub fn to_record(&self) -> Vec<String> {
        let mut row = vec![
            self.date.to_string(),
            self.node_count.to_string(),
            self.edge_count.to_string(),
        ];
        match &self.degrees {
            Some(s) => row.extend([s.min, s.q1, s.median, s.mean, s.q3, s.max].map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row
    }
}

fn snapshot_from<'a>(
    flights: impl IntoIterator<Item = &'a FlightRecord>,
    day: NaiveDate,
    granularity: Granularity,
) -> NetworkSnapshot {
    let mut nodes = BTreeSet::new();
    let mut edges: BTreeMap<AirportPair, u64> = BTreeMap::new();
    for f in flights.into_iter().filter(|f| f.date == day) {
        nodes.insert(f.origin.clone());
        nodes.insert(f.destination.clone());
        *edges
            .entry(AirportPair::new(f.origin.clone(), f.destination.clone()))
            .or_default() += 1;
    }
    NetworkSnapshot {
        timestamp: day,
        granularity,
        nodes,
        edges,
    }
}

/// Snapshot of the legs flown on `day`; other days are ignored.
pub fn build_snapshot(flights: &[FlightRecord], day: NaiveDate, granularity: Granularity) -> NetworkSnapshot {
    snapshot_from(flights, day, granularity)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalNetwork {
    pub granularity: Granularity,
    snapshots: Vec<NetworkSnapshot>,
}

impl TemporalNetwork {
    pub fn snapshots(&self) -> &[NetworkSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn summaries(&self) -> Vec<SnapshotSummary> {
        self.snapshots.iter().map(NetworkSnapshot::summary_row).collect()
    }
}

pub fn build_temporal_network(
    flights: &[FlightRecord],
    sample_days: &[NaiveDate],
    granularity: Granularity,
    execution: Execution,
) -> Result<TemporalNetwork, GraphError> {
    for w in sample_days.windows(2) {
        if w[1] <= w[0] {
            return Err(GraphError::UnorderedDays(w[1], w[0]));
        }
    }
    if let Some(&day) = sample_days.iter().find(|d| !granularity.accepts(**d)) {
        return Err(GraphError::BadSampleDay { day, granularity });
    }
    let mut by_day: HashMap<NaiveDate, Vec<&FlightRecord>> = HashMap::new();
    for f in flights {
        by_day.entry(f.date).or_default().push(f);
    }
    let snapshots = execution.map(sample_days, |day| {
        let legs = by_day.get(day).map(Vec::as_slice).unwrap_or(&[]);
        snapshot_from(legs.iter().copied(), *day, granularity)
    });
    Ok(TemporalNetwork {
        granularity,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 2, 2).unwrap()
    }

    fn code(s: &str) -> AirportCode {
        AirportCode::new(s).unwrap()
    }

    fn fl(o: &str, d: &str, date: NaiveDate) -> FlightRecord {
        FlightRecord::new(o, d, date).unwrap()
    }

    fn three_flights() -> Vec<FlightRecord> {
        vec![fl("A", "B", day()), fl("B", "A", day()), fl("A", "C", day())]
    }

    #[test]
    fn empty_day_gives_empty_snapshot() {
        let s = build_snapshot(&three_flights(), day().succ_opt().unwrap(), Granularity::Weekly);
        assert_eq!(s.node_count(), 0);
        assert_eq!(s.edge_count(), 0);
        assert!(matches!(s.degree_summary(), Err(GraphError::EmptySnapshot(_))));
        assert!(s.degree_distribution().is_err());
        assert_eq!(s.summary_row().to_record()[3], "");
    }

    #[test]
    fn three_flight_fixture() {
        let s = build_snapshot(&three_flights(), day(), Granularity::Weekly);
        assert_eq!(s.node_count(), 3);
        assert_eq!(s.edge_count(), 3);
        assert_eq!(s.edge_multiplicity()[&AirportPair::new(code("A"), code("B"))], 2);
        assert_eq!(s.edge_multiplicity()[&AirportPair::new(code("C"), code("A"))], 1);
        assert_eq!(s.degree(&code("A")).unwrap(), 3);
        assert_eq!(s.degree(&code("B")).unwrap(), 2);
        assert_eq!(s.degree(&code("Z")), Err(GraphError::UnknownAirport(code("Z"))));
        assert_eq!(s.simple_edges().len(), 2);
    }

    #[test]
    fn single_flight() {
        let s = build_snapshot(&[fl("A", "B", day())], day(), Granularity::Weekly);
        assert_eq!(s.degree(&code("A")).unwrap(), 1);
        assert_eq!(s.degree(&code("B")).unwrap(), 1);
        assert_eq!(s.degree_distribution().unwrap(), BTreeMap::from([(1, 1.0)]));
    }

    #[test]
    fn summary_and_distribution_of_112() {
        // A-B and C-A: degrees {2, 1, 1}
        let s = build_snapshot(&[fl("A", "B", day()), fl("C", "A", day())], day(), Granularity::Weekly);
        let sum = s.degree_summary().unwrap();
        assert_eq!(sum.min, 1.0);
        assert_eq!(sum.median, 1.0);
        assert!((sum.mean - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(sum.max, 2.0);
        assert_eq!(sum.q1, 1.0);
        assert_eq!(sum.q3, 1.5);
        let dist = s.degree_distribution().unwrap();
        assert!((dist[&1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((dist[&2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_degree_distribution() {
        // a 4-cycle: every node has degree 2
        let f = vec![fl("A", "B", day()), fl("B", "C", day()), fl("C", "D", day()), fl("D", "A", day())];
        let s = build_snapshot(&f, day(), Granularity::Weekly);
        assert_eq!(s.degree_distribution().unwrap(), BTreeMap::from([(2, 1.0)]));
    }

    #[test]
    fn temporal_network_cases() {
        let sun1 = day();
        let sun2 = NaiveDate::from_ymd_opt(2020, 2, 9).unwrap();
        let net = build_temporal_network(&[], &[], Granularity::Weekly, Execution::default()).unwrap();
        assert!(net.is_empty());

        let flights = vec![fl("A", "B", sun1), fl("C", "D", sun2), fl("D", "E", sun2)];
        let net = build_temporal_network(&flights, &[sun1, sun2], Granularity::Weekly, Execution::default())
            .unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.snapshots()[0], build_snapshot(&flights, sun1, Granularity::Weekly));
        assert_eq!(net.snapshots()[1].edge_count(), 2);
        assert_eq!(net.snapshots()[1].node_count(), 3);

        assert!(matches!(
            build_temporal_network(&flights, &[sun2, sun1], Granularity::Weekly, Execution::default()),
            Err(GraphError::UnorderedDays(..))
        ));
        assert!(matches!(
            build_temporal_network(&flights, &[sun1], Granularity::Monthly, Execution::default()),
            Err(GraphError::BadSampleDay { .. })
        ));
    }

    #[test]
    fn sampling_conventions_match_window_lengths() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 13).unwrap();
        let end = NaiveDate::from_ymd_opt(2020, 8, 25).unwrap();
        assert_eq!(Granularity::Weekly.sample_days(start, end).len(), 32);
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2020, 8, 31).unwrap();
        assert_eq!(Granularity::Monthly.sample_days(start, end).len(), 248);
    }
}
