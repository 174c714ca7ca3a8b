use chrono::{Days, NaiveDate};
use proptest::prelude::*;

use mobility_extremes::graph::{build_temporal_network, Granularity};
use mobility_extremes::indices::{
    air_mobility_index, weekly_average, zscore, DateRange, IndexKind, RawIndexSeries,
};
use mobility_extremes::ingest::{FlightRecord, SeriesObservation};
use mobility_extremes::stats::{mean, sample_sd};
use mobility_extremes::Execution;

fn daily(values: &[f64]) -> RawIndexSeries {
    let start = NaiveDate::from_ymd_opt(2020, 1, 13).unwrap();
    let obs = values
        .iter()
        .enumerate()
        .map(|(i, &value)| SeriesObservation {
            date: start + Days::new(i as u64),
            value,
        })
        .collect();
    RawIndexSeries::new(IndexKind::Price, "x", obs).unwrap()
}

fn spread_out() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 3..80).prop_filter("needs spread", |v| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

proptest! {
    #[test]
    fn zscore_is_standardized(values in spread_out()) {
        let z = zscore(&daily(&values)).unwrap().values();
        prop_assert!(mean(&z).abs() < 1e-10);
        prop_assert!((sample_sd(&z) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zscore_ignores_positive_affine_maps(values in spread_out(), a in 0.01f64..100.0, b in -1e3f64..1e3) {
        let z = zscore(&daily(&values)).unwrap().values();
        let moved: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let w = zscore(&daily(&moved)).unwrap().values();
        for (x, y) in z.iter().zip(&w) {
            prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
        }
    }

    #[test]
    fn weekly_average_of_constant_is_constant(c in -1e4f64..1e4, days in 7usize..120) {
        let s = daily(&vec![c; days]);
        let window = DateRange::new(NaiveDate::from_ymd_opt(2020, 1, 13).unwrap(), NaiveDate::from_ymd_opt(2020, 8, 25).unwrap());
        let w = weekly_average(&s, window);
        prop_assert!(!w.series.is_empty());
        for v in w.series.values() {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn ami_is_total_multiplicity(per_day in prop::collection::vec(0usize..30, 1..10)) {
        let first = NaiveDate::from_ymd_opt(2020, 1, 19).unwrap();
        let days: Vec<NaiveDate> = (0..per_day.len()).map(|i| first + Days::new(7 * i as u64)).collect();
        let codes = ["A", "B", "C", "D"];
        let flights: Vec<FlightRecord> = days
            .iter()
            .zip(&per_day)
            .flat_map(|(&day, &k)| (0..k).map(move |i| FlightRecord::new(codes[i % 4], codes[(i + 1 + i / 4) % 4], day)))
            .filter_map(Result::ok)
            .collect();
        let net = build_temporal_network(&flights, &days, Granularity::Weekly, Execution::Sequential).unwrap();
        let ami = air_mobility_index(&net);
        for (snap, v) in net.snapshots().iter().zip(ami.values()) {
            let total: u64 = snap.edge_multiplicity().values().sum();
            prop_assert_eq!(v, total as f64);
        }
    }
}
