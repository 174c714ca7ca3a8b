use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use mobility_extremes::indices::{DatedSeries, NormalizedSeries};
use mobility_extremes::ingest::SeriesObservation;

use super::Outcome;
use crate::config::AIR_MONTHLY;
use crate::context::Context;
use crate::error::CliError;
use crate::output::{exact, Outputs};

#[derive(Serialize)]
struct Normalization {
    mean: f64,
    sd: f64,
    /// Observations in the emitted series.
    n: usize,
    first: Option<NaiveDate>,
    last: Option<NaiveDate>,
}

fn series_rows(observations: &[SeriesObservation]) -> Vec<Vec<String>> {
    observations
        .iter()
        .map(|o| vec![o.date.to_string(), exact(o.value)])
        .collect()
}

fn normalization(s: &NormalizedSeries) -> Normalization {
    Normalization {
        mean: s.mean_used,
        sd: s.sd_used,
        n: s.observations().len(),
        first: s.observations().first().map(|o| o.date),
        last: s.observations().last().map(|o| o.date),
    }
}

pub fn run(ctx: &mut Context, out: &mut Outputs) -> Result<Outcome, CliError> {
    let weekly = ctx.weekly_indices()?.clone();
    let mut sidecar = BTreeMap::new();
    for raw in &weekly.raw {
        out.write_csv(&format!("indices/raw/{}.csv", raw.name), &["date", "value"], &series_rows(raw.observations()))?;
    }
    for z in &weekly.normalized {
        out.write_csv(&format!("indices/{}.csv", z.source_name), &["date", "value"], &series_rows(z.observations()))?;
        sidecar.insert(z.source_name.clone(), normalization(z));
    }

    let design = &weekly.design;
    let mut header = vec!["date"];
    header.extend(design.columns.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = design
        .dates
        .iter()
        .zip(&design.rows)
        .map(|(d, r)| std::iter::once(d.to_string()).chain(r.iter().map(|&v| exact(v))).collect())
        .collect();
    out.write_csv("indices/design.csv", &header, &rows)?;
    out.write_json("indices/design.json", design)?;

    if ctx.config.network.monthly {
        let monthly = ctx.monthly_ami()?.clone();
        out.write_csv(
            &format!("indices/raw/{AIR_MONTHLY}.csv"),
            &["date", "value"],
            &series_rows(monthly.raw.observations()),
        )?;
        out.write_csv(
            &format!("indices/{AIR_MONTHLY}.csv"),
            &["date", "value"],
            &series_rows(monthly.normalized.observations()),
        )?;
        sidecar.insert(AIR_MONTHLY.to_string(), normalization(&monthly.normalized));
    }
    out.write_json("indices/normalization.json", &sidecar)?;
    Ok(Outcome::Ran)
}
