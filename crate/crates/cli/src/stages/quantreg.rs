use serde::Serialize;

use mobility_extremes::quantreg::{fit_profile, FitOptions, QuantileFit, QuantileProblem};
use mobility_extremes::rng::substream_seed;

use super::Outcome;
use crate::context::Context;
use crate::error::CliError;
use crate::output::{exact, rounded, Outputs};

pub const BOOTSTRAP_STREAM: &str = "quantreg.bootstrap";

#[derive(Serialize)]
struct Report<'a> {
    response: &'a str,
    n_obs: usize,
    fits: &'a [QuantileFit],
}

/// Each covariate swept over its observed range with the others at their means.
fn line_rows(fits: &[QuantileFit], columns: &[(String, Vec<f64>)], points: usize) -> Vec<Vec<String>> {
    let means: Vec<f64> = columns
        .iter()
        .map(|(_, c)| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mut rows = Vec::new();
    for fit in fits {
        for (j, (name, col)) in columns.iter().enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..points {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                let mut at = means.clone();
                at[j] = x;
                rows.push(vec![exact(fit.tau), name.clone(), exact(x), exact(fit.predict(&at))]);
            }
        }
    }
    rows
}

pub fn run(ctx: &mut Context, out: &mut Outputs) -> Result<Outcome, CliError> {
    let Some(q) = ctx.config.quantreg.clone() else {
        ctx.warn("no [quantreg] section; stage skipped");
        return Ok(Outcome::Skipped);
    };
    let design = ctx.weekly_indices()?.design.clone();
    let column = |name: &str| design.column(name).expect("validated against indices.weekly");
    let response = column(&q.response);
    let columns: Vec<(String, Vec<f64>)> = q.covariates.iter().map(|c| (c.clone(), column(c))).collect();
    let named: Vec<(&str, Vec<f64>)> = columns.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    let problem = QuantileProblem::new(response, &named)?;
    let options = FitOptions {
        bootstrap_replicates: q.bootstrap_replicates,
        seed: substream_seed(ctx.config.seed, BOOTSTRAP_STREAM),
        execution: ctx.execution,
    };
    let fits = fit_profile(&problem, &q.taus, &options)?;
    for f in &fits {
        if f.bootstrap.replicates > 0 && f.bootstrap.usable < f.bootstrap.replicates {
            ctx.warn(format!(
                "quantreg tau {}: {} of {} bootstrap resamples were rank deficient and skipped",
                f.tau,
                f.bootstrap.replicates - f.bootstrap.usable,
                f.bootstrap.replicates
            ));
        }
    }

    let taus: Vec<String> = fits.iter().map(|f| exact(f.tau)).collect();
    let names = problem.names().to_vec();

    let mut header = vec!["term", "statistic"];
    header.extend(taus.iter().map(String::as_str));
    let mut table = Vec::new();
    for (j, term) in names.iter().enumerate() {
        let mut est = vec![term.clone(), "estimate".into()];
        est.extend(fits.iter().map(|f| exact(f.coefficients[j])));
        table.push(est);
        let mut se = vec![term.clone(), "std_error".into()];
        se.extend(
            fits.iter()
                .map(|f| f.std_errors.as_ref().map_or(String::new(), |s| exact(s[j]))),
        );
        table.push(se);
    }
    let mut r2 = vec!["pseudo_r2".to_string(), "estimate".into()];
    r2.extend(fits.iter().map(|f| exact(f.pseudo_r2)));
    table.push(r2);
    out.write_csv("quantreg/table.csv", &header, &table)?;

    let mut report_header = vec!["term"];
    report_header.extend(taus.iter().map(String::as_str));
    let mut report = Vec::new();
    for (j, term) in names.iter().enumerate() {
        let mut row = vec![term.clone()];
        row.extend(fits.iter().map(|f| match &f.std_errors {
            Some(s) => format!("{} ({})", rounded(f.coefficients[j]), rounded(s[j])),
            None => rounded(f.coefficients[j]),
        }));
        report.push(row);
    }
    let mut r2 = vec!["pseudo_r2".to_string()];
    r2.extend(fits.iter().map(|f| rounded(f.pseudo_r2)));
    report.push(r2);
    out.write_csv("quantreg/report.csv", &report_header, &report)?;

    out.write_json(
        "quantreg/fits.json",
        &Report {
            response: &q.response,
            n_obs: problem.n_obs(),
            fits: &fits,
        },
    )?;
    out.write_csv(
        "quantreg/lines.csv",
        &["tau", "covariate", "x", "fitted"],
        &line_rows(&fits, &columns, q.line_points),
    )?;
    Ok(Outcome::Ran)
}
