use serde::Serialize;

use super::blocks::BlockSeries;
use super::fit::{fit_gev, GevFit, GevFitOptions};
use super::model::GevSpec;
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionRow {
    pub spec: GevSpec,
    pub fit: Result<GevFit, String>,
}

impl SelectionRow {
    pub fn aic(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.aic)
    }

    pub fn bic(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.bic)
    }
}

/// Fits ranked by ascending AIC; failed fits follow in input order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelTable {
    pub rows: Vec<SelectionRow>,
}

impl ModelTable {
    pub fn best(&self) -> Option<&GevFit> {
        self.rows.first().and_then(|r| r.fit.as_ref().ok())
    }

    pub fn fits(&self) -> impl Iterator<Item = &GevFit> {
        self.rows.iter().filter_map(|r| r.fit.as_ref().ok())
    }
}

/// Fits every spec (in parallel across specs; restarts within a fit run sequentially).
pub fn model_selection(blocks: &BlockSeries, specs: &[GevSpec], options: &GevFitOptions) -> ModelTable {
    let inner = GevFitOptions {
        execution: Execution::Sequential,
        ..options.clone()
    };
    let fits = options
        .execution
        .map(specs, |spec| fit_gev(blocks, spec, &inner).map_err(|e| e.to_string()));
    let mut rows: Vec<SelectionRow> = specs
        .iter()
        .cloned()
        .zip(fits)
        .map(|(spec, fit)| SelectionRow { spec, fit })
        .collect();
    // Stable: ties and failures keep input order.
    rows.sort_by(|a, b| match (a.aic(), b.aic()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    ModelTable { rows }
}
