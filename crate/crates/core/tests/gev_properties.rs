use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mobility_extremes::evt::{
    block_minima, diagnostics, exceedance_probability, fit_gev, gev_cdf, gev_pdf, gev_quantile, gev_sample,
    gumbel_residual, model_selection, negate, negative_log_likelihood, return_level, BlockSeries, CovariateScale,
    GevFitOptions, GevParams, GevSpec, Orientation, YearMonth, TIME_INDEX,
};
use mobility_extremes::ingest::SeriesObservation;

const JAN_2000: YearMonth = YearMonth { year: 2000, month: 1 };

fn draws(n: usize, seed: u64, mu: impl Fn(usize) -> f64, sigma: impl Fn(usize) -> f64, xi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n).map(|t| gev_sample(&mut rng, mu(t), sigma(t), xi)).collect()
}

fn maxima(values: &[f64]) -> BlockSeries {
    BlockSeries::from_values(JAN_2000, values, Orientation::Maxima)
        .unwrap()
        .with_time_index(JAN_2000)
        .unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let inner: f64 = (1..intervals)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn cdf_agrees_with_integrated_density() {
    // Lower support endpoint of GEV(0, 1, 0.2) is -5.
    let integral = simpson(|z| gev_pdf(z, 0.0, 1.0, 0.2).unwrap(), -5.0, 1.0, 200_000);
    let cdf = gev_cdf(1.0, 0.0, 1.0, 0.2).unwrap();
    assert!((integral - cdf).abs() < 1e-9, "{integral} vs {cdf}");
    assert!((cdf - (-(1.2f64).powf(-5.0)).exp()).abs() < 1e-15);
}

#[test]
fn gumbel_branch_is_continuous() {
    for i in 0..=200 {
        let z = -4.0 + 0.05 * i as f64;
        let g = gev_cdf(z, 0.0, 1.0, 0.0).unwrap();
        for xi in [1e-6, -1e-6, 1.0001e-6, -1.0001e-6] {
            assert!((gev_cdf(z, 0.0, 1.0, xi).unwrap() - g).abs() < 1e-6);
            assert!((gev_pdf(z, 0.0, 1.0, xi).unwrap() - gev_pdf(z, 0.0, 1.0, 0.0).unwrap()).abs() < 1e-6);
        }
    }
    for p in [0.01, 0.3, 0.5, 0.9, 0.999] {
        let g = gev_quantile(p, 0.0, 1.0, 0.0).unwrap();
        assert!((gev_quantile(p, 0.0, 1.0, 1.0001e-6).unwrap() - g).abs() < 1e-4);
    }
}

/// Analytic derivatives of the stationary negative log-likelihood in
/// `(mu, log sigma, xi)`.
fn analytic_gradient(z: &[f64], mu: f64, log_sigma: f64, xi: f64) -> [f64; 3] {
    let sigma = log_sigma.exp();
    let mut g = [0.0; 3];
    for &zi in z {
        let y = (zi - mu) / sigma;
        let b = 1.0 + xi * y;
        let tail = b.powf(-1.0 / xi);
        g[0] += -(xi + 1.0) / (sigma * b) + tail / (sigma * b);
        g[1] += 1.0 - (1.0 + 1.0 / xi) * (b - 1.0) / b + tail * (b - 1.0) / (xi * b);
        g[2] += -b.ln() / (xi * xi) + (1.0 + 1.0 / xi) * y / b + tail * (b.ln() / (xi * xi) - y / (xi * b));
    }
    g
}

fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h[i];
            down[i] -= h[i];
            (f(&up) - f(&down)) / (2.0 * h[i])
        })
        .collect()
}

#[test]
fn likelihood_gradient_checks() {
    let z = draws(300, 1, |_| 5.0, |_| 1.5, 0.15);
    let blocks = maxima(&z);
    let spec = GevSpec::stationary("M0");
    let nll = |theta: &[f64]| negative_log_likelihood(&blocks, &spec, &GevParams::new(&spec, theta.to_vec()).unwrap()).unwrap();
    let at = [5.2, 0.35, 0.1];
    let exact = analytic_gradient(&z, at[0], at[1], at[2]);
    let numeric = central_gradient(&nll, &at, &[1e-5; 3]);
    for (a, n) in exact.iter().zip(&numeric) {
        assert!((a - n).abs() <= 1e-5 * (1.0 + a.abs()), "{a} vs {n}");
    }

    // Non-stationary spec: Richardson agreement of two step sizes.
    let trend = draws(248, 2, |t| 2.0 + 0.05 * t as f64, |t| (0.3 + 0.002 * t as f64).exp(), -0.2);
    let blocks = maxima(&trend);
    let spec = GevSpec::new("M1", &[TIME_INDEX], &[TIME_INDEX]);
    let nll = |theta: &[f64]| negative_log_likelihood(&blocks, &spec, &GevParams::new(&spec, theta.to_vec()).unwrap()).unwrap();
    let at = [2.1, 0.049, 0.25, 0.0021, -0.15];
    // Slopes multiply t <= 248, so their steps shrink accordingly.
    let h = [1e-4, 1e-4 / 248.0, 1e-4, 1e-4 / 248.0, 1e-4];
    let coarse = central_gradient(&nll, &at, &h);
    let fine = central_gradient(&nll, &at, &h.map(|v| v / 2.0));
    for (c, f) in coarse.iter().zip(&fine) {
        let richardson = (4.0 * f - c) / 3.0;
        assert!((f - richardson).abs() <= 1e-5 * (1.0 + richardson.abs()), "{c} {f}");
    }
}

#[test]
fn nested_models_never_lose_likelihood() {
    let n = 248;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k: Vec<f64> = (0..n).map(|_| rng.gen_range(20.0..120.0)).collect();
    let z = draws(n, 4, |t| 2.0 + 0.01 * t as f64 + 0.02 * k[t - 1], |_| 1.2, -0.1);
    let blocks = maxima(&z).with_covariate("K", &k, CovariateScale::Raw).unwrap();
    let specs = [
        GevSpec::stationary("M0"),
        GevSpec::new("M1", &[TIME_INDEX], &[TIME_INDEX]),
        GevSpec::new("M2", &[TIME_INDEX, "K"], &[TIME_INDEX]),
    ];
    let opts = GevFitOptions::default();
    let ll: Vec<f64> = specs.iter().map(|s| fit_gev(&blocks, s, &opts).unwrap().log_likelihood).collect();
    assert!(ll[0] <= ll[1] + 1e-6 && ll[1] <= ll[2] + 1e-6, "{ll:?}");

    let table = model_selection(&blocks, &specs, &opts);
    assert_eq!(table.best().unwrap().spec.name, "M2");
    let aic: Vec<f64> = table.rows.iter().map(|r| r.aic().unwrap()).collect();
    assert!(aic.windows(2).all(|w| w[0] <= w[1]));
    for f in table.fits() {
        let k = f.n_params() as f64;
        assert_eq!(f.aic, 2.0 * k - 2.0 * f.log_likelihood);
        assert_eq!(f.bic, k * (f.n_blocks as f64).ln() - 2.0 * f.log_likelihood);
    }
}

#[test]
fn identical_specs_tie() {
    let blocks = maxima(&draws(120, 5, |_| 0.0, |_| 1.0, 0.1));
    let specs = [GevSpec::stationary("a"), GevSpec::stationary("b")];
    let table = model_selection(&blocks, &specs, &GevFitOptions::default());
    assert_eq!(table.rows.len(), 2);
    assert!((table.rows[0].aic().unwrap() - table.rows[1].aic().unwrap()).abs() < 1e-6);
    let single = model_selection(&blocks, &specs[..1], &GevFitOptions::default());
    assert_eq!(single.rows.len(), 1);
}

#[test]
fn trend_wins_model_selection() {
    let specs = [GevSpec::stationary("M0"), GevSpec::new("M1", &[TIME_INDEX], &[])];
    let mut wins = 0;
    for seed in 0..100 {
        let blocks = maxima(&draws(120, 1000 + seed, |t| 0.02 * t as f64, |_| 1.0, 0.0));
        let opts = GevFitOptions {
            seed,
            ..GevFitOptions::default()
        };
        let table = model_selection(&blocks, &specs, &opts);
        if table.best().unwrap().spec.name == "M1" {
            wins += 1;
        }
    }
    assert!(wins >= 95, "trend preferred in {wins}/100");
}

#[test]
fn minima_probabilities_match_simulation() {
    let prices = draws(240, 6, |_| -40.0, |_| 6.0, -0.3);
    let blocks = BlockSeries::from_values(JAN_2000, &prices.iter().map(|v| -v).collect::<Vec<_>>(), Orientation::Minima).unwrap();
    let spec = GevSpec::stationary("M0");
    let fit = fit_gev(&blocks, &spec, &GevFitOptions::default()).unwrap();
    let none = BTreeMap::new();
    let (mu, sigma, xi) = fit.parameters_at(&none).unwrap();
    assert!(xi < 0.0);
    let lowest_price = -(mu - sigma / xi);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sims: Vec<f64> = (0..1_000_000).map(|_| -gev_sample(&mut rng, mu, sigma, xi)).collect();
    for z in [lowest_price - 1.0, 35.0, 40.0, 48.0] {
        let p = exceedance_probability(&fit, z, &none).unwrap();
        let freq = sims.iter().filter(|&&y| y < z).count() as f64 / sims.len() as f64;
        let se = (p * (1.0 - p) / sims.len() as f64).sqrt();
        assert!((p - freq).abs() <= 5.0 * se + 1e-9, "z {z}: {p} vs {freq}");
    }
    assert_eq!(exceedance_probability(&fit, lowest_price - 1.0, &none).unwrap(), 0.0);

    // Price return levels fall as the period grows.
    let levels: Vec<f64> = [10.0, 20.0, 50.0, 100.0]
        .iter()
        .map(|&r| return_level(&fit, r, &none).unwrap().level)
        .collect();
    assert!(levels.windows(2).all(|w| w[1] < w[0]), "{levels:?}");
    let r0 = 1.0 / (1.0 - (-1.0f64).exp());
    assert!((return_level(&fit, r0, &none).unwrap().level + mu).abs() < 1e-9 * (1.0 + mu.abs()));
}

#[test]
fn qq_points_sit_inside_simulated_envelope() {
    let z = draws(150, 8, |_| 3.0, |_| 0.8, 0.1);
    let fit = fit_gev(&maxima(&z), &GevSpec::stationary("M0"), &GevFitOptions::default()).unwrap();
    let bundle = diagnostics(&fit).unwrap();
    assert_eq!(bundle.qq.len(), 150);
    let (mu, sigma, xi) = fit.parameters_at(&BTreeMap::new()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let reps = 400;
    let mut sorted_residuals: Vec<Vec<f64>> = (0..reps)
        .map(|_| {
            let mut r: Vec<f64> = (0..150)
                .map(|_| gumbel_residual(gev_sample(&mut rng, mu, sigma, xi), mu, sigma, xi).unwrap())
                .collect();
            r.sort_by(f64::total_cmp);
            r
        })
        .collect();
    let mut inside = 0;
    for (i, point) in bundle.qq.iter().enumerate() {
        let mut column: Vec<f64> = sorted_residuals.iter_mut().map(|r| r[i]).collect();
        column.sort_by(f64::total_cmp);
        let (lo, hi) = (column[reps / 40], column[reps - 1 - reps / 40]);
        if (lo..=hi).contains(&point.empirical) {
            inside += 1;
        }
    }
    assert!(inside >= 140, "{inside}/150 inside the envelope");
}

#[test]
fn gumbel_limit_residuals_are_standardized_values() {
    for z in [-2.0, 0.0, 1.5, 7.0] {
        assert_eq!(gumbel_residual(z, 1.0, 2.0, 0.0), Some((z - 1.0) / 2.0));
        assert!((gumbel_residual(z, 1.0, 2.0, 1e-7).unwrap() - (z - 1.0) / 2.0).abs() < 1e-12);
    }
}

/// Three observations per calendar month.
fn monthly(values: &[f64]) -> Vec<SeriesObservation> {
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let m = i / 3;
            SeriesObservation {
                date: chrono::NaiveDate::from_ymd_opt(2000 + (m / 12) as i32, (m % 12) as u32 + 1, 1 + (i % 3) as u32)
                    .unwrap(),
                value,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minimum_is_negated_maximum(values in prop::collection::vec(-1e3f64..1e3, 1..90)) {
        let minima = block_minima(&monthly(&values)).unwrap().series;
        let flipped = negate(&minima).unwrap();
        let max_of_negated: Vec<f64> = values
            .chunks(3)
            .map(|c| c.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        prop_assert_eq!(flipped.extrema(), max_of_negated.clone());
        prop_assert_eq!(minima.extrema(), max_of_negated.iter().map(|v| -v).collect::<Vec<_>>());
        prop_assert_eq!(flipped.orientation(), Orientation::Maxima);
    }

    #[test]
    fn cdf_at_location_is_inverse_e(log_sigma in -5.0f64..5.0, xi in -2.0f64..2.0, mu in -1e3f64..1e3) {
        let p = gev_cdf(mu, mu, log_sigma.exp(), xi).unwrap();
        prop_assert!((p - (-1.0f64).exp()).abs() < 1e-12);
    }
}
