use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::EvtError;
use crate::ingest::SeriesObservation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Minima,
    Maxima,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateScale {
    Raw,
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(d: NaiveDate) -> Self {
        YearMonth {
            year: d.year(),
            month: d.month(),
        }
    }

    /// Months elapsed since `origin` (may be negative).
    pub fn months_since(self, origin: YearMonth) -> i64 {
        i64::from(self.year - origin.year) * 12 + i64::from(self.month) - i64::from(origin.month)
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub label: YearMonth,
    pub extremum: f64,
    pub covariates: BTreeMap<String, f64>,
}

/// Ordered block extrema with per-block covariates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSeries {
    blocks: Vec<Block>,
    orientation: Orientation,
    covariate_scales: BTreeMap<String, CovariateScale>,
}

/// Conventional name of the 1-based month counter covariate.
pub const TIME_INDEX: &str = "t";

impl BlockSeries {
    pub fn new(blocks: Vec<Block>, orientation: Orientation) -> Result<Self, EvtError> {
        for w in blocks.windows(2) {
            if w[1].label <= w[0].label {
                return Err(EvtError::InvalidBlocks(format!(
                    "labels not strictly increasing at {}",
                    w[1].label
                )));
            }
        }
        if let Some(first) = blocks.first() {
            let keys: BTreeSet<&String> = first.covariates.keys().collect();
            for b in &blocks {
                if !b.extremum.is_finite() {
                    return Err(EvtError::InvalidBlocks(format!("non-finite extremum in {}", b.label)));
                }
                if b.covariates.keys().collect::<BTreeSet<_>>() != keys {
                    return Err(EvtError::InvalidBlocks(format!("covariate keys differ in {}", b.label)));
                }
                if b.covariates.values().any(|v| !v.is_finite()) {
                    return Err(EvtError::InvalidBlocks(format!("non-finite covariate in {}", b.label)));
                }
            }
        }
        Ok(BlockSeries {
            blocks,
            orientation,
            covariate_scales: BTreeMap::new(),
        })
    }

    /// Builds a series from bare extrema labelled with consecutive months from `start`.
    pub fn from_values(start: YearMonth, values: &[f64], orientation: Orientation) -> Result<Self, EvtError> {
        let mut label = start;
        let blocks = values
            .iter()
            .map(|&v| {
                let b = Block {
                    label,
                    extremum: v,
                    covariates: BTreeMap::new(),
                };
                label = label.next();
                b
            })
            .collect();
        BlockSeries::new(blocks, orientation)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn extrema(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.extremum).collect()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.blocks
            .first()
            .map(|b| b.covariates.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn covariate(&self, name: &str) -> Option<Vec<f64>> {
        self.blocks.iter().map(|b| b.covariates.get(name).copied()).collect()
    }

    pub fn covariate_scales(&self) -> &BTreeMap<String, CovariateScale> {
        &self.covariate_scales
    }

    /// Adds (or replaces) a covariate column; `values` must have one entry per block.
    pub fn with_covariate(mut self, name: &str, values: &[f64], scale: CovariateScale) -> Result<Self, EvtError> {
        if values.len() != self.blocks.len() {
            return Err(EvtError::InvalidBlocks(format!(
                "covariate `{name}` has {} values for {} blocks",
                values.len(),
                self.blocks.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EvtError::InvalidBlocks(format!("non-finite value in covariate `{name}`")));
        }
        for (b, &v) in self.blocks.iter_mut().zip(values) {
            b.covariates.insert(name.to_string(), v);
        }
        self.covariate_scales.insert(name.to_string(), scale);
        Ok(self)
    }

    /// Adds covariate `t`: months since `origin`, plus one.
    pub fn with_time_index(self, origin: YearMonth) -> Result<Self, EvtError> {
        let t: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| (b.label.months_since(origin) + 1) as f64)
            .collect();
        self.with_covariate(TIME_INDEX, &t, CovariateScale::Raw)
    }

    /// Relabels the orientation without touching values.
    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Keeps blocks whose label satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&Block) -> bool) -> BlockSeries {
        BlockSeries {
            blocks: self.blocks.iter().filter(|b| keep(b)).cloned().collect(),
            orientation: self.orientation,
            covariate_scales: self.covariate_scales.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockMinima {
    pub series: BlockSeries,
    /// Calendar months between the first and last observation that had no data.
    pub empty_months: Vec<YearMonth>,
}

/// Minimum of each calendar month that has at least one observation.
pub fn block_minima(series: &[SeriesObservation]) -> Result<BlockMinima, EvtError> {
    if series.is_empty() {
        return Err(EvtError::InvalidBlocks("empty series".into()));
    }
    let mut mins: BTreeMap<YearMonth, f64> = BTreeMap::new();
    for o in series {
        if !o.value.is_finite() {
            return Err(EvtError::InvalidBlocks(format!("non-finite value on {}", o.date)));
        }
        mins.entry(YearMonth::of(o.date))
            .and_modify(|m| *m = m.min(o.value))
            .or_insert(o.value);
    }
    let first = *mins.keys().next().expect("non-empty");
    let last = *mins.keys().next_back().expect("non-empty");
    let mut empty_months = Vec::new();
    let mut ym = first;
    while ym <= last {
        if !mins.contains_key(&ym) {
            empty_months.push(ym);
        }
        ym = ym.next();
    }
    let blocks = mins
        .into_iter()
        .map(|(label, extremum)| Block {
            label,
            extremum,
            covariates: BTreeMap::new(),
        })
        .collect();
    Ok(BlockMinima {
        series: BlockSeries::new(blocks, Orientation::Minima)?,
        empty_months,
    })
}

/// Minima to maxima: `Y' = -Y`.
pub fn negate(blocks: &BlockSeries) -> Result<BlockSeries, EvtError> {
    if blocks.orientation != Orientation::Minima {
        return Err(EvtError::NotMinima);
    }
    Ok(BlockSeries {
        blocks: blocks
            .blocks
            .iter()
            .map(|b| Block {
                label: b.label,
                extremum: -b.extremum,
                covariates: b.covariates.clone(),
            })
            .collect(),
        orientation: Orientation::Maxima,
        covariate_scales: blocks.covariate_scales.clone(),
    })
}
