//! Model structure and the GEV negative log-likelihood.
//!
//! Location and log-scale are linear in their covariates:
//! `mu(t) = beta0 + sum_j beta_j x_j(t)`, `log sigma(t) = gamma0 + sum_j gamma_j x_j(t)`;
//! the shape is constant. Parameters are laid out as
//! `[beta0, beta_*.., gamma0, gamma_*.., xi]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::blocks::{BlockSeries, Orientation};
use super::distribution::XI_TOL;
use super::EvtError;

/// Base of the value returned outside the support.
pub const SUPPORT_PENALTY: f64 = 1e10;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GevSpec {
    pub name: String,
    #[serde(default)]
    pub location_terms: Vec<String>,
    #[serde(default)]
    pub logscale_terms: Vec<String>,
    /// Only the empty list (constant shape) is supported.
    #[serde(default)]
    pub shape_terms: Vec<String>,
}

impl GevSpec {
    pub fn stationary(name: &str) -> Self {
        GevSpec {
            name: name.into(),
            ..GevSpec::default()
        }
    }

    pub fn new(name: &str, location: &[&str], logscale: &[&str]) -> Self {
        GevSpec {
            name: name.into(),
            location_terms: location.iter().map(|s| s.to_string()).collect(),
            logscale_terms: logscale.iter().map(|s| s.to_string()).collect(),
            shape_terms: Vec::new(),
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.location_terms.is_empty() && self.logscale_terms.is_empty()
    }

    pub fn n_params(&self) -> usize {
        3 + self.location_terms.len() + self.logscale_terms.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["beta0".to_string()];
        names.extend(self.location_terms.iter().map(|t| format!("beta_{t}")));
        names.push("gamma0".into());
        names.extend(self.logscale_terms.iter().map(|t| format!("gamma_{t}")));
        names.push("xi".into());
        names
    }

    /// All covariates referenced by the spec, deduplicated, in first-use order.
    pub fn covariates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.location_terms.iter().chain(&self.logscale_terms) {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    /// Readable model formula, e.g. `mu = beta0 + beta_t*t; log sigma = gamma0; xi`.
    pub fn describe(&self) -> String {
        let side = |head: &str, coef: &str, terms: &[String]| {
            let mut s = format!("{head} = {coef}0");
            for t in terms {
                s.push_str(&format!(" + {coef}_{t}*{t}"));
            }
            s
        };
        format!(
            "{}; {}; xi",
            side("mu", "beta", &self.location_terms),
            side("log sigma", "gamma", &self.logscale_terms)
        )
    }

    pub fn validate(&self, blocks: &BlockSeries) -> Result<(), EvtError> {
        if !self.shape_terms.is_empty() {
            return Err(EvtError::UnsupportedShapeTerms(self.name.clone()));
        }
        let available = blocks.covariate_names();
        for c in self.covariates() {
            if !available.contains(&c) {
                return Err(EvtError::UnknownCovariate(c));
            }
        }
        Ok(())
    }
}

/// Parameter values keyed by the spec's parameter names.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GevParams {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl GevParams {
    pub fn new(spec: &GevSpec, values: Vec<f64>) -> Result<Self, EvtError> {
        if values.len() != spec.n_params() {
            return Err(EvtError::ParameterCount {
                expected: spec.n_params(),
                got: values.len(),
            });
        }
        Ok(GevParams {
            names: spec.param_names(),
            values,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn xi(&self) -> f64 {
        *self.values.last().expect("xi is always present")
    }

    /// `(mu, sigma)` at the given covariate values.
    pub fn location_scale(&self, spec: &GevSpec, covariates: &BTreeMap<String, f64>) -> Result<(f64, f64), EvtError> {
        let lookup = |t: &String| {
            covariates
                .get(t)
                .copied()
                .ok_or_else(|| EvtError::IncompleteScenario(t.clone()))
        };
        let nl = spec.location_terms.len();
        let mut mu = self.values[0];
        for (j, t) in spec.location_terms.iter().enumerate() {
            mu += self.values[1 + j] * lookup(t)?;
        }
        let mut log_sigma = self.values[1 + nl];
        for (j, t) in spec.logscale_terms.iter().enumerate() {
            log_sigma += self.values[2 + nl + j] * lookup(t)?;
        }
        Ok((mu, log_sigma.exp()))
    }
}

/// Response and covariate columns laid out for fast repeated evaluation.
#[derive(Clone, Debug)]
pub(crate) struct Likelihood {
    pub z: Vec<f64>,
    /// Row-major `n x location_terms`.
    pub loc: Vec<f64>,
    pub n_loc: usize,
    /// Row-major `n x logscale_terms`.
    pub scale: Vec<f64>,
    pub n_scale: usize,
}

impl Likelihood {
    pub fn new(blocks: &BlockSeries, spec: &GevSpec) -> Result<Self, EvtError> {
        spec.validate(blocks)?;
        let columns = |terms: &[String]| -> Vec<f64> {
            blocks
                .blocks()
                .iter()
                .flat_map(|b| terms.iter().map(|t| b.covariates[t]))
                .collect()
        };
        Ok(Likelihood {
            z: blocks.extrema(),
            loc: columns(&spec.location_terms),
            n_loc: spec.location_terms.len(),
            scale: columns(&spec.logscale_terms),
            n_scale: spec.logscale_terms.len(),
        })
    }

    /// Applies `x -> (x - center) / spread` to each covariate column.
    pub fn standardized(&self, loc: &[(f64, f64)], scale: &[(f64, f64)]) -> Likelihood {
        let apply = |data: &[f64], k: usize, cs: &[(f64, f64)]| -> Vec<f64> {
            data.iter()
                .enumerate()
                .map(|(i, x)| {
                    let (c, s) = cs[i % k];
                    (x - c) / s
                })
                .collect()
        };
        Likelihood {
            z: self.z.clone(),
            loc: if self.n_loc > 0 { apply(&self.loc, self.n_loc, loc) } else { Vec::new() },
            n_loc: self.n_loc,
            scale: if self.n_scale > 0 { apply(&self.scale, self.n_scale, scale) } else { Vec::new() },
            n_scale: self.n_scale,
        }
    }

    pub fn column(&self, which: Side, j: usize) -> Vec<f64> {
        let (data, k) = match which {
            Side::Location => (&self.loc, self.n_loc),
            Side::LogScale => (&self.scale, self.n_scale),
        };
        data.iter().skip(j).step_by(k).copied().collect()
    }

    /// Negative log-likelihood; outside the support returns
    /// `SUPPORT_PENALTY` plus the total support violation.
    pub fn nll(&self, theta: &[f64]) -> f64 {
        let nl = self.n_loc;
        let ns = self.n_scale;
        let beta = &theta[..=nl];
        let gamma = &theta[nl + 1..nl + 2 + ns];
        let xi = theta[nl + 2 + ns];
        let gumbel = xi.abs() < XI_TOL;

        let mut total = 0.0;
        let mut violation = 0.0;
        for i in 0..self.z.len() {
            let mut mu = beta[0];
            for j in 0..nl {
                mu += beta[1 + j] * self.loc[i * nl + j];
            }
            let mut log_sigma = gamma[0];
            for j in 0..ns {
                log_sigma += gamma[1 + j] * self.scale[i * ns + j];
            }
            let sigma = log_sigma.exp();
            let y = (self.z[i] - mu) / sigma;
            if gumbel {
                total += log_sigma + y + (-y).exp();
                continue;
            }
            let xy = xi * y;
            if xy <= -1.0 || !xy.is_finite() {
                violation += if xy.is_finite() { -1.0 - xy + 1e-12 } else { 1.0 };
                continue;
            }
            let log_b = xy.ln_1p();
            total += log_sigma + (1.0 + 1.0 / xi) * log_b + (-log_b / xi).exp();
        }
        if violation > 0.0 || !total.is_finite() {
            let v = if violation.is_finite() { violation.min(1e9) } else { 1e9 };
            SUPPORT_PENALTY + v
        } else {
            total
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    Location,
    LogScale,
}

/// Negative log-likelihood of maxima-oriented blocks under `spec` at `params`.
pub fn negative_log_likelihood(blocks: &BlockSeries, spec: &GevSpec, params: &GevParams) -> Result<f64, EvtError> {
    if blocks.orientation() != Orientation::Maxima {
        return Err(EvtError::NotMaxima);
    }
    if params.names != spec.param_names() {
        return Err(EvtError::ParameterCount {
            expected: spec.n_params(),
            got: params.values.len(),
        });
    }
    Ok(Likelihood::new(blocks, spec)?.nll(&params.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evt::blocks::{CovariateScale, YearMonth};
    use crate::evt::distribution::{gev_pdf, gev_sample};
    use rand::SeedableRng;

    const JAN2000: YearMonth = YearMonth { year: 2000, month: 1 };

    fn maxima(values: &[f64]) -> BlockSeries {
        BlockSeries::from_values(JAN2000, values, Orientation::Maxima).unwrap()
    }

    #[test]
    fn single_block_at_location() {
        let spec = GevSpec::stationary("m0");
        let p = GevParams::new(&spec, vec![2.0, 0.0, 0.1]).unwrap();
        let v = negative_log_likelihood(&maxima(&[2.0]), &spec, &p).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_log_density_sum() {
        let spec = GevSpec::stationary("m0");
        let data = [0.3, 1.2, -0.4, 2.5, 0.9];
        for xi in [-0.3, 0.0, 0.25] {
            let p = GevParams::new(&spec, vec![0.5, 0.2f64.ln_1p(), xi]).unwrap();
            let nll = negative_log_likelihood(&maxima(&data), &spec, &p).unwrap();
            let direct: f64 = -data
                .iter()
                .map(|&z| gev_pdf(z, 0.5, 1.2, xi).unwrap().ln())
                .sum::<f64>();
            assert!((nll - direct).abs() < 1e-10, "xi={xi}: {nll} vs {direct}");
        }
    }

    #[test]
    fn support_violation_penalized() {
        let spec = GevSpec::stationary("m0");
        // xi = 0.5, mu = 0, sigma = 1: lower endpoint -2.
        let p = GevParams::new(&spec, vec![0.0, 0.0, 0.5]).unwrap();
        let v = negative_log_likelihood(&maxima(&[-3.0, 0.0]), &spec, &p).unwrap();
        assert!(v >= SUPPORT_PENALTY);
        let worse = negative_log_likelihood(&maxima(&[-5.0, 0.0]), &spec, &p).unwrap();
        assert!(worse > v);
    }

    #[test]
    fn truth_beats_shifted_location() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..1000).map(|_| gev_sample(&mut rng, 0.0, 1.0, 0.0)).collect();
        let spec = GevSpec::stationary("m0");
        let blocks = maxima(&data);
        let at = |mu: f64| {
            negative_log_likelihood(&blocks, &spec, &GevParams::new(&spec, vec![mu, 0.0, 0.0]).unwrap()).unwrap()
        };
        assert!(at(0.0) < at(1.0));
    }

    #[test]
    fn covariates_enter_linear_predictors() {
        let blocks = maxima(&[1.0, 2.0, 3.0])
            .with_time_index(JAN2000)
            .unwrap();
        let spec = GevSpec::new("m1", &["t"], &["t"]);
        assert_eq!(spec.param_names(), vec!["beta0", "beta_t", "gamma0", "gamma_t", "xi"]);
        let p = GevParams::new(&spec, vec![0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        // z_t = mu_t exactly: each block contributes log sigma + 0 + 1 = 1.
        let v = negative_log_likelihood(&blocks, &spec, &p).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
        let (mu, sigma) = p.location_scale(&spec, &BTreeMap::from([("t".into(), 244.0)])).unwrap();
        assert_eq!((mu, sigma), (244.0, 1.0));
        assert!(matches!(
            p.location_scale(&spec, &BTreeMap::new()),
            Err(EvtError::IncompleteScenario(_))
        ));
    }

    #[test]
    fn spec_validation() {
        let blocks = maxima(&[1.0, 2.0]).with_covariate("K", &[1.0, 2.0], CovariateScale::Raw).unwrap();
        assert!(GevSpec::new("x", &["K"], &[]).validate(&blocks).is_ok());
        assert!(matches!(
            GevSpec::new("x", &["t"], &[]).validate(&blocks),
            Err(EvtError::UnknownCovariate(_))
        ));
        let shaped = GevSpec {
            shape_terms: vec!["K".into()],
            ..GevSpec::stationary("s")
        };
        assert!(matches!(shaped.validate(&blocks), Err(EvtError::UnsupportedShapeTerms(_))));
        assert!(negative_log_likelihood(
            &blocks.clone().with_orientation(Orientation::Minima),
            &GevSpec::stationary("s"),
            &GevParams::new(&GevSpec::stationary("s"), vec![0.0, 0.0, 0.1]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn describe_formula() {
        let spec = GevSpec::new("Model 2", &["t", "K"], &["t"]);
        assert_eq!(
            spec.describe(),
            "mu = beta0 + beta_t*t + beta_K*K; log sigma = gamma0 + gamma_t*t; xi"
        );
        assert_eq!(spec.covariates(), vec!["t".to_string(), "K".to_string()]);
    }
}
