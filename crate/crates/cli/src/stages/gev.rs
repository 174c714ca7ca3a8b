use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use mobility_extremes::evt::{
    block_minima, diagnostics, model_selection, return_level, return_level_curve, DiagnosticBundle, GevFit,
    GevFitOptions, GevSpec, YearMonth,
};
use mobility_extremes::indices::DatedSeries;
use mobility_extremes::rng::substream_seed;

use super::Outcome;
use crate::config::{ScaleChoice, ScenarioConfig, AIR_MONTHLY};
use crate::context::{by_month, list_some, Context};
use crate::error::CliError;
use crate::output::{exact, rounded, slug, Outputs};

pub const RESTART_STREAM: &str = "gev.restarts";

#[derive(Serialize)]
struct SelectionEntry<'a> {
    rank: Option<usize>,
    spec: &'a GevSpec,
    description: String,
    fit: Option<&'a GevFit>,
    error: Option<&'a str>,
}

#[derive(Clone, Serialize)]
struct LevelRow {
    model: String,
    scenario: String,
    covariates: BTreeMap<String, f64>,
    return_period: f64,
    level: f64,
}

#[derive(Serialize)]
struct Results<'a> {
    n_blocks: usize,
    first_block: String,
    last_block: String,
    covariate_scale: &'a ScaleChoice,
    selection: Vec<SelectionEntry<'a>>,
    return_levels: &'a [LevelRow],
    curves: &'a [LevelRow],
}

fn level_rows(fit: &GevFit, scenario: &ScenarioConfig, periods: &[f64]) -> Result<Vec<LevelRow>, CliError> {
    periods
        .iter()
        .map(|&r| {
            let rl = return_level(fit, r, &scenario.covariates)?;
            Ok(LevelRow {
                model: fit.spec.name.clone(),
                scenario: scenario.label.clone(),
                covariates: scenario.covariates.clone(),
                return_period: r,
                level: rl.level,
            })
        })
        .collect()
}

fn write_diagnostics(out: &mut Outputs, dir: &str, bundle: &DiagnosticBundle) -> Result<(), CliError> {
    let qq: Vec<Vec<String>> = bundle
        .qq
        .iter()
        .map(|p| vec![exact(p.theoretical), exact(p.empirical)])
        .collect();
    out.write_csv(&format!("{dir}/qq.csv"), &["theoretical", "empirical"], &qq)?;
    let last = bundle.histogram.len().saturating_sub(1);
    let histogram_at = |x: f64| {
        bundle
            .histogram
            .iter()
            .enumerate()
            .find(|(i, b)| x >= b.lower && (x < b.upper || (*i == last && x == b.upper)))
            .map_or(0.0, |(_, b)| b.density)
    };
    let density: Vec<Vec<String>> = bundle
        .density
        .iter()
        .map(|p| vec![exact(p.x), exact(p.model_density), exact(histogram_at(p.x))])
        .collect();
    out.write_csv(&format!("{dir}/density.csv"), &["x", "model_density", "histogram_density"], &density)?;
    let bins: Vec<Vec<String>> = bundle
        .histogram
        .iter()
        .map(|b| vec![exact(b.lower), exact(b.upper), b.count.to_string(), exact(b.density)])
        .collect();
    out.write_csv(&format!("{dir}/histogram.csv"), &["lower", "upper", "count", "density"], &bins)?;
    out.write_json(&format!("{dir}/diagnostics.json"), bundle)
}

pub fn run(ctx: &mut Context, out: &mut Outputs) -> Result<Outcome, CliError> {
    let gev = match &ctx.config.gev {
        Some(g) if !g.models.is_empty() => g.clone(),
        _ => {
            ctx.warn("no GEV models configured (gev.models); stage skipped");
            return Ok(Outcome::Skipped);
        }
    };
    let window = ctx.config.monthly_window.range();
    let daily = ctx.prices()?.restrict(window);
    if daily.is_empty() {
        return Err(CliError::Data(format!(
            "no prices between {} and {}",
            window.start, window.end
        )));
    }
    let minima = block_minima(daily.observations())?;
    if !minima.empty_months.is_empty() {
        ctx.warn(format!(
            "gev: {} months without prices: {}",
            minima.empty_months.len(),
            list_some(&minima.empty_months)
        ));
    }
    let origin = YearMonth::of(window.start);
    let mut blocks = minima.series.with_time_index(origin)?;

    let specs: Vec<GevSpec> = gev.models.iter().map(|m| m.spec()).collect();
    if specs.iter().any(|s| s.covariates().iter().any(|c| c == AIR_MONTHLY)) {
        let ami = ctx.monthly_ami()?;
        let values = by_month(match gev.covariate_scale {
            ScaleChoice::Raw => ami.raw.observations(),
            ScaleChoice::Normalized => ami.normalized.observations(),
        });
        let covered: BTreeSet<YearMonth> = blocks
            .blocks()
            .iter()
            .map(|b| b.label)
            .filter(|m| values.contains_key(&(m.year, m.month)))
            .collect();
        let missing: Vec<YearMonth> = blocks
            .blocks()
            .iter()
            .map(|b| b.label)
            .filter(|m| !covered.contains(m))
            .collect();
        if !missing.is_empty() {
            ctx.warn(format!(
                "gev: {} months lack {AIR_MONTHLY} and were dropped: {}",
                missing.len(),
                list_some(&missing)
            ));
            blocks = blocks.filter(|b| covered.contains(&b.label));
        }
        let k: Vec<f64> = blocks
            .blocks()
            .iter()
            .map(|b| values[&(b.label.year, b.label.month)])
            .collect();
        blocks = blocks.with_covariate(AIR_MONTHLY, &k, gev.covariate_scale.scale())?;
    }
    if blocks.is_empty() {
        return Err(CliError::Data("no monthly blocks to fit".into()));
    }

    let options = GevFitOptions {
        restarts: gev.restarts,
        seed: substream_seed(ctx.config.seed, RESTART_STREAM),
        execution: ctx.execution,
        ..GevFitOptions::default()
    };
    let table = model_selection(&blocks, &specs, &options);
    let failures: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| r.fit.as_ref().err().map(|e| format!("{}: {e}", r.spec.name)))
        .collect();
    if table.fits().next().is_none() {
        return Err(CliError::Numerical(format!("every GEV fit failed: {}", failures.join("; "))));
    }
    for f in &failures {
        ctx.warn(format!("gev fit failed: {f}"));
    }

    let mut selection_rows = Vec::new();
    let mut selection_json = Vec::new();
    let mut rank = 0;
    for row in &table.rows {
        let description = row.spec.describe();
        match &row.fit {
            Ok(fit) => {
                rank += 1;
                selection_rows.push(vec![
                    rank.to_string(),
                    row.spec.name.clone(),
                    description.clone(),
                    fit.n_params().to_string(),
                    exact(fit.log_likelihood),
                    exact(fit.aic),
                    exact(fit.bic),
                    fit.optimizer.converged.to_string(),
                    String::new(),
                ]);
                selection_json.push(SelectionEntry {
                    rank: Some(rank),
                    spec: &row.spec,
                    description,
                    fit: Some(fit),
                    error: None,
                });
            }
            Err(e) => {
                selection_rows.push(vec![
                    String::new(),
                    row.spec.name.clone(),
                    description.clone(),
                    row.spec.n_params().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                    e.clone(),
                ]);
                selection_json.push(SelectionEntry {
                    rank: None,
                    spec: &row.spec,
                    description,
                    fit: None,
                    error: Some(e),
                });
            }
        }
    }
    out.write_csv(
        "gev/selection.csv",
        &["rank", "model", "description", "n_params", "log_likelihood", "aic", "bic", "converged", "error"],
        &selection_rows,
    )?;

    let fits: Vec<&GevFit> = table.fits().collect();
    let mut params = Vec::new();
    for fit in &fits {
        for (i, (name, value)) in fit.params.names.iter().zip(&fit.params.values).enumerate() {
            let se = fit.std_errors.as_ref().map_or(String::new(), |s| exact(s[i]));
            params.push(vec![fit.spec.name.clone(), name.clone(), exact(*value), se]);
        }
        if fit.std_errors.is_none() {
            ctx.warn(format!(
                "gev {}: observed information is not positive definite; standard errors unavailable",
                fit.spec.name
            ));
        }
    }
    out.write_csv("gev/parameters.csv", &["model", "parameter", "estimate", "std_error"], &params)?;

    // Table layout: one row per parameter name, one column per model.
    let mut names: Vec<String> = Vec::new();
    for fit in &fits {
        for n in &fit.params.names {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let mut header = vec!["parameter"];
    header.extend(fits.iter().map(|f| f.spec.name.as_str()));
    let report: Vec<Vec<String>> = names
        .iter()
        .map(|n| {
            std::iter::once(n.clone())
                .chain(fits.iter().map(|f| match (f.params.get(n), f.std_error(n)) {
                    (Some(v), Some(se)) => format!("{} ({})", rounded(v), rounded(se)),
                    (Some(v), None) => rounded(v),
                    _ => String::new(),
                }))
                .collect()
        })
        .collect();
    out.write_csv("gev/parameters_report.csv", &header, &report)?;

    let mut levels = Vec::new();
    let mut curves = Vec::new();
    for fit in &fits {
        for scenario in &gev.scenarios {
            let missing: Vec<String> = fit
                .spec
                .covariates()
                .into_iter()
                .filter(|c| !scenario.covariates.contains_key(c))
                .collect();
            if !missing.is_empty() {
                ctx.warn(format!(
                    "gev: scenario `{}` lacks {} needed by {}; skipped for that model",
                    scenario.label,
                    missing.join(", "),
                    fit.spec.name
                ));
                continue;
            }
            levels.extend(level_rows(fit, scenario, &scenario.return_periods)?);
            let c = &gev.curve;
            for (r, level) in return_level_curve(fit, &scenario.covariates, c.r_min, c.r_max, c.points)? {
                curves.push(LevelRow {
                    model: fit.spec.name.clone(),
                    scenario: scenario.label.clone(),
                    covariates: scenario.covariates.clone(),
                    return_period: r,
                    level,
                });
            }
        }
    }
    let level_csv = |rows: &[LevelRow]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| vec![r.model.clone(), r.scenario.clone(), exact(r.return_period), exact(r.level)])
            .collect()
    };
    let level_header = ["model", "scenario", "return_period", "level"];
    out.write_csv("gev/return_levels.csv", &level_header, &level_csv(&levels))?;
    out.write_csv("gev/return_level_curves.csv", &level_header, &level_csv(&curves))?;

    // Human variant: one row per model and scenario, one column per period.
    let mut periods: Vec<f64> = Vec::new();
    for r in &levels {
        if !periods.contains(&r.return_period) {
            periods.push(r.return_period);
        }
    }
    let period_labels: Vec<String> = periods.iter().map(|&r| exact(r)).collect();
    let mut header = vec!["model", "scenario"];
    header.extend(period_labels.iter().map(String::as_str));
    let mut grouped: Vec<Vec<String>> = Vec::new();
    for r in &levels {
        let col = 2 + periods.iter().position(|&p| p == r.return_period).expect("collected above");
        let row = match grouped.iter_mut().find(|g| g[0] == r.model && g[1] == r.scenario) {
            Some(row) => row,
            None => {
                let mut row = vec![String::new(); 2 + periods.len()];
                row[0] = r.model.clone();
                row[1] = r.scenario.clone();
                grouped.push(row);
                grouped.last_mut().expect("just pushed")
            }
        };
        row[col] = rounded(r.level);
    }
    out.write_csv("gev/return_levels_report.csv", &header, &grouped)?;

    let mut used = BTreeSet::new();
    for fit in &fits {
        let mut dir = slug(&fit.spec.name);
        let mut k = 2;
        while !used.insert(dir.clone()) {
            dir = format!("{}_{k}", slug(&fit.spec.name));
            k += 1;
        }
        match diagnostics(fit) {
            Ok(bundle) => write_diagnostics(out, &format!("gev/diagnostics/{dir}"), &bundle)?,
            Err(e) => ctx.warn(format!("gev {}: no diagnostics ({e})", fit.spec.name)),
        }
    }

    let labels: Vec<YearMonth> = blocks.blocks().iter().map(|b| b.label).collect();
    out.write_json(
        "gev/results.json",
        &Results {
            n_blocks: blocks.len(),
            first_block: labels.first().map(|l| l.to_string()).unwrap_or_default(),
            last_block: labels.last().map(|l| l.to_string()).unwrap_or_default(),
            covariate_scale: &gev.covariate_scale,
            selection: selection_json,
            return_levels: &levels,
            curves: &curves,
        },
    )?;
    Ok(Outcome::Ran)
}
