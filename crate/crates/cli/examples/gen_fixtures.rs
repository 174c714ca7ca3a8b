//! Regenerates the synthetic inputs under `fixtures/`.
//!
//! `cargo run -p mobex --example gen_fixtures [-- <dir>]`
//!
//! A latent daily demand level drives flight counts, driving activity and
//! fuel prices, with a sharp dip in the spring of 2020. Prices also carry a
//! slow upward trend so the monthly minima have something to detect.

use std::error::Error;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

const AIRPORTS: [(&str, f64, f64, f64); 20] = [
    ("ATL", 33.64, -84.43, 9.0),
    ("ORD", 41.98, -87.90, 7.0),
    ("DFW", 32.90, -97.04, 6.5),
    ("DEN", 39.86, -104.67, 5.5),
    ("LAX", 33.94, -118.41, 5.5),
    ("JFK", 40.64, -73.78, 4.5),
    ("SFO", 37.62, -122.38, 4.0),
    ("SEA", 47.45, -122.31, 3.5),
    ("LAS", 36.08, -115.15, 3.0),
    ("MCO", 28.43, -81.31, 3.0),
    ("CLT", 35.21, -80.94, 3.0),
    ("PHX", 33.43, -112.01, 2.5),
    ("MIA", 25.79, -80.29, 2.5),
    ("IAH", 29.98, -95.34, 2.5),
    ("BOS", 42.36, -71.01, 2.0),
    ("MSP", 44.88, -93.22, 2.0),
    ("DTW", 42.21, -83.35, 2.0),
    ("SLC", 40.79, -111.98, 1.5),
    ("BNA", 36.12, -86.68, 1.0),
    ("BOI", 43.56, -116.22, 0.5),
];

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Relative activity: 1 in normal times, dipping to about 0.35 in April 2020.
fn demand(day: NaiveDate) -> f64 {
    let seasonal = 1.0 + 0.05 * (2.0 * std::f64::consts::PI * (day.ordinal() as f64 - 200.0) / 365.25).cos();
    let onset = ymd(2020, 3, 8);
    if day < onset {
        return seasonal;
    }
    let since = (day - onset).num_days() as f64;
    let trough = 0.35;
    let level = if since < 28.0 {
        1.0 - (1.0 - trough) * since / 28.0
    } else {
        (trough + 0.004 * (since - 28.0)).min(0.75)
    };
    seasonal * level
}

fn pick(rng: &mut ChaCha8Rng, total: f64) -> usize {
    let mut u = rng.gen::<f64>() * total;
    for (i, a) in AIRPORTS.iter().enumerate() {
        u -= a.3;
        if u <= 0.0 {
            return i;
        }
    }
    AIRPORTS.len() - 1
}

fn main() -> Result<(), Box<dyn Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20200415);
    let noise = Normal::new(0.0, 1.0)?;

    let mut airports = BufWriter::new(File::create(dir.join("airports.csv"))?);
    writeln!(airports, "code,latitude,longitude")?;
    for (code, lat, lon, _) in AIRPORTS {
        writeln!(airports, "{code},{lat},{lon}")?;
    }
    airports.flush()?;

    // Snapshot days: the 15th of every month since 2000 and every 2020 Sunday.
    let mut days: Vec<NaiveDate> = (0..248).map(|m| ymd(2000 + m / 12, (m % 12) as u32 + 1, 15)).collect();
    let mut d = ymd(2020, 1, 12);
    while d <= ymd(2020, 8, 30) {
        days.push(d);
        d += chrono::Duration::days(7);
    }
    days.sort();
    days.dedup();

    let total: f64 = AIRPORTS.iter().map(|a| a.3).sum();
    let mut flights = BufWriter::new(File::create(dir.join("flights.csv"))?);
    writeln!(flights, "FL_DATE,ORIGIN,DEST,CANCELLED")?;
    for &day in &days {
        let years = (day.year() - 2000) as f64;
        let mean = (32.0 + 0.6 * years) * demand(day);
        let n = Poisson::new(mean)?.sample(&mut rng) as usize;
        for _ in 0..n {
            let o = pick(&mut rng, total);
            let mut t = pick(&mut rng, total);
            while t == o {
                t = pick(&mut rng, total);
            }
            let cancelled = u8::from(rng.gen::<f64>() < 0.03);
            writeln!(flights, "{day},{},{},{cancelled}", AIRPORTS[o].0, AIRPORTS[t].0)?;
        }
    }
    flights.flush()?;

    let mut prices = BufWriter::new(File::create(dir.join("prices.csv"))?);
    writeln!(prices, "date,price")?;
    let mut day = ymd(2000, 1, 1);
    while day <= ymd(2020, 8, 31) {
        let months = ((day.year() - 2000) * 12 + day.month0() as i32) as f64;
        let p = 0.9 + 0.006 * months + 0.5 * demand(day) + 0.04 * noise.sample(&mut rng);
        writeln!(prices, "{day},{:.4}", p)?;
        day += chrono::Duration::days(1);
    }
    prices.flush()?;

    let mut driving = BufWriter::new(File::create(dir.join("mobility.csv"))?);
    writeln!(driving, "date,driving")?;
    let mut covid = BufWriter::new(File::create(dir.join("covid.csv"))?);
    writeln!(covid, "date,new_cases,new_deaths")?;
    let mut day = ymd(2020, 1, 13);
    while day <= ymd(2020, 8, 31) {
        let weekend = if day.weekday().number_from_monday() >= 6 { 12.0 } else { 0.0 };
        let h = 100.0 * demand(day) + weekend + 4.0 * noise.sample(&mut rng);
        writeln!(driving, "{day},{:.2}", h)?;
        let since = (day - ymd(2020, 2, 20)).num_days().max(0) as f64;
        let cases = Poisson::new(1.0 + 30_000.0 / (1.0 + (-(since - 45.0) / 8.0).exp()))?.sample(&mut rng);
        let deaths = Poisson::new(0.5 + cases * 0.03)?.sample(&mut rng);
        writeln!(covid, "{day},{cases},{deaths}")?;
        day += chrono::Duration::days(1);
    }
    driving.flush()?;
    covid.flush()?;
    Ok(())
}
