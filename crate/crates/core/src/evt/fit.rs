//! Maximum likelihood fitting of (non-)stationary GEV models.
//!
//! The optimizer works on centred and scaled covariates so that a raw flight
//! count in the tens of thousands and a month counter in the hundreds present
//! coefficients of comparable size. Both coordinate systems are linear in the
//! parameters, so estimates and their covariance map back exactly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::blocks::{negate, BlockSeries, CovariateScale, Orientation};
use super::model::{GevParams, GevSpec, Likelihood, Side, SUPPORT_PENALTY};
use super::EvtError;
use crate::optim::{multistart, NelderMeadOptions};
use crate::par::Execution;
use crate::rng::replicate_rng;
use crate::stats;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const START_SHAPE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct GevFitOptions {
    /// Random starts in addition to the moment-based one.
    pub restarts: usize,
    pub seed: u64,
    pub execution: Execution,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for GevFitOptions {
    fn default() -> Self {
        GevFitOptions {
            restarts: 5,
            seed: 0,
            execution: Execution::default(),
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerReport {
    pub converged: bool,
    pub evaluations: usize,
    pub starts: usize,
    pub polish_rounds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GevFit {
    pub spec: GevSpec,
    /// Estimates for the maxima-oriented (negated, for minima input) variable.
    pub params: GevParams,
    /// `None` when the observed information matrix is not positive definite.
    pub std_errors: Option<Vec<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_blocks: usize,
    pub optimizer: OptimizerReport,
    /// Orientation of the data passed in.
    pub orientation: Orientation,
    pub covariate_scales: BTreeMap<String, CovariateScale>,
    /// Maxima-oriented data the model was fitted to.
    #[serde(skip)]
    pub data: BlockSeries,
}

impl GevFit {
    pub fn n_params(&self) -> usize {
        self.params.values.len()
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.params.names.iter().position(|n| n == name)?;
        self.std_errors.as_ref().map(|se| se[i])
    }

    /// `(mu, sigma, xi)` at a covariate scenario, maxima scale.
    pub fn parameters_at(&self, scenario: &BTreeMap<String, f64>) -> Result<(f64, f64, f64), EvtError> {
        let (mu, sigma) = self.params.location_scale(&self.spec, scenario)?;
        Ok((mu, sigma, self.params.xi()))
    }
}

/// Column centre and spread; constant columns keep spread 1.
fn standardizer(column: &[f64]) -> (f64, f64) {
    let c = stats::mean(column);
    let s = stats::sample_sd(column);
    if s.is_finite() && s > 1e-12 * (1.0 + c.abs()) {
        (c, s)
    } else {
        (c, 1.0)
    }
}

/// Matrix taking internal parameters to external ones.
fn external_map(loc: &[(f64, f64)], scale: &[(f64, f64)]) -> DMatrix<f64> {
    let k = 3 + loc.len() + scale.len();
    let mut a = DMatrix::zeros(k, k);
    let mut block = |offset: usize, cs: &[(f64, f64)]| {
        a[(offset, offset)] = 1.0;
        for (j, (c, s)) in cs.iter().enumerate() {
            a[(offset, offset + 1 + j)] = -c / s;
            a[(offset + 1 + j, offset + 1 + j)] = 1.0 / s;
        }
    };
    block(0, loc);
    block(1 + loc.len(), scale);
    a[(k - 1, k - 1)] = 1.0;
    a
}

/// Central-difference Hessian with steps `1e-4 * (1 + |theta_i|)`.
fn numerical_hessian(f: &dyn Fn(&[f64]) -> f64, theta: &[f64]) -> DMatrix<f64> {
    let k = theta.len();
    let h: Vec<f64> = theta.iter().map(|t| 1e-4 * (1.0 + t.abs())).collect();
    let f0 = f(theta);
    let at = |moves: &[(usize, f64)]| {
        let mut x = theta.to_vec();
        for &(i, d) in moves {
            x[i] += d;
        }
        f(&x)
    };
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        hess[(i, i)] = (at(&[(i, h[i])]) - 2.0 * f0 + at(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])]) - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

pub fn fit_gev(blocks: &BlockSeries, spec: &GevSpec, options: &GevFitOptions) -> Result<GevFit, EvtError> {
    let maxima = match blocks.orientation() {
        Orientation::Minima => negate(blocks)?,
        Orientation::Maxima => blocks.clone(),
    };
    let k = spec.n_params();
    let n = maxima.len();
    if n < 3 + k {
        return Err(EvtError::InsufficientBlocks { have: n, need: 3 + k });
    }

    let raw = Likelihood::new(&maxima, spec)?;
    let loc_std: Vec<(f64, f64)> = (0..raw.n_loc).map(|j| standardizer(&raw.column(Side::Location, j))).collect();
    let scale_std: Vec<(f64, f64)> = (0..raw.n_scale).map(|j| standardizer(&raw.column(Side::LogScale, j))).collect();
    let lik = raw.standardized(&loc_std, &scale_std);
    let objective = |theta: &[f64]| lik.nll(theta);

    // Gumbel moment start for the intercepts, zero slopes.
    let sd = stats::sample_sd(&lik.z);
    let sigma0 = if sd.is_finite() && sd > 0.0 { sd * 6f64.sqrt() / std::f64::consts::PI } else { 1.0 };
    let mu0 = stats::mean(&lik.z) - EULER_GAMMA * sigma0;
    let nl = lik.n_loc;
    let ns = lik.n_scale;
    let mut start = vec![0.0; k];
    start[0] = mu0;
    start[nl + 1] = sigma0.ln();
    start[k - 1] = START_SHAPE;
    if objective(&start) >= SUPPORT_PENALTY {
        start[k - 1] = 0.0;
    }

    let mut steps = vec![0.0; k];
    steps[0] = 0.2 * sigma0;
    for j in 0..nl {
        steps[1 + j] = 0.1 * sigma0;
    }
    steps[nl + 1] = 0.1;
    for j in 0..ns {
        steps[nl + 2 + j] = 0.05;
    }
    steps[k - 1] = 0.05;

    let mut starts = vec![start.clone()];
    for r in 0..options.restarts {
        let mut rng = replicate_rng(options.seed, r as u64);
        let mut s = start.clone();
        s[0] += sigma0 * rng.gen_range(-0.5..0.5);
        for j in 0..nl {
            s[1 + j] = sigma0 * rng.gen_range(-0.2..0.2);
        }
        s[nl + 1] += rng.gen_range(-0.3..0.3);
        for j in 0..ns {
            s[nl + 2 + j] = rng.gen_range(-0.1..0.1);
        }
        s[k - 1] = rng.gen_range(-0.2..0.4);
        starts.push(s);
    }

    let result = multistart(&objective, &starts, &steps, &options.nelder_mead, options.execution);
    let best = result.best;
    if !best.converged || best.value >= SUPPORT_PENALTY {
        return Err(EvtError::NoConvergence {
            model: spec.name.clone(),
            evaluations: best.evaluations,
            value: best.value,
        });
    }

    let to_external = external_map(&loc_std, &scale_std);
    let internal = nalgebra::DVector::from_column_slice(&best.x);
    let external: Vec<f64> = (&to_external * internal).iter().copied().collect();

    let hessian = numerical_hessian(&objective, &best.x);
    let covariance = hessian
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .map(|inv| &to_external * inv * to_external.transpose())
        .filter(|cov| (0..k).all(|i| cov[(i, i)].is_finite() && cov[(i, i)] > 0.0));
    let std_errors = covariance
        .as_ref()
        .map(|cov| (0..k).map(|i| cov[(i, i)].sqrt()).collect());
    let covariance = covariance.map(|cov| (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect());

    let log_likelihood = -best.value;
    let kf = k as f64;
    Ok(GevFit {
        spec: spec.clone(),
        params: GevParams::new(spec, external)?,
        std_errors,
        covariance,
        log_likelihood,
        aic: 2.0 * kf - 2.0 * log_likelihood,
        bic: kf * (n as f64).ln() - 2.0 * log_likelihood,
        n_blocks: n,
        optimizer: OptimizerReport {
            converged: best.converged,
            evaluations: best.evaluations,
            starts: starts.len(),
            polish_rounds: result.polish_rounds,
        },
        orientation: blocks.orientation(),
        covariate_scales: blocks.covariate_scales().clone(),
        data: maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evt::blocks::YearMonth;
    use crate::evt::distribution::gev_sample;
    use crate::evt::model::negative_log_likelihood;

    const JAN2000: YearMonth = YearMonth { year: 2000, month: 1 };

    fn sample(n: usize, mu: f64, sigma: f64, xi: f64, seed: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, 0);
        (0..n).map(|_| gev_sample(&mut rng, mu, sigma, xi)).collect()
    }

    #[test]
    fn recovers_stationary_parameters() {
        let data = sample(5000, 10.0, 2.0, 0.2, 3);
        let blocks = BlockSeries::from_values(JAN2000, &data, Orientation::Maxima).unwrap();
        let fit = fit_gev(&blocks, &GevSpec::stationary("m0"), &GevFitOptions::default()).unwrap();
        let se = fit.std_errors.clone().unwrap();
        let truth = [10.0, 2f64.ln(), 0.2];
        for i in 0..3 {
            assert!(
                (fit.params.values[i] - truth[i]).abs() < 3.0 * se[i],
                "{}: {} vs {} (se {})",
                fit.params.names[i],
                fit.params.values[i],
                truth[i],
                se[i]
            );
        }
        assert!(fit.optimizer.converged);
        let k = 3.0;
        assert_eq!(fit.aic, 2.0 * k - 2.0 * fit.log_likelihood);
        assert_eq!(fit.bic, k * 5000f64.ln() - 2.0 * fit.log_likelihood);
        let nll = negative_log_likelihood(&blocks, &fit.spec, &fit.params).unwrap();
        assert!((nll + fit.log_likelihood).abs() < 1e-6 * (1.0 + nll.abs()));
    }

    #[test]
    fn zero_trend_column_nests_stationary_model() {
        let data = sample(300, 0.0, 1.0, -0.1, 5);
        let blocks = BlockSeries::from_values(JAN2000, &data, Orientation::Maxima)
            .unwrap()
            .with_covariate("z", &vec![0.0; 300], CovariateScale::Raw)
            .unwrap();
        let opts = GevFitOptions::default();
        let m0 = fit_gev(&blocks, &GevSpec::stationary("m0"), &opts).unwrap();
        let m1 = fit_gev(&blocks, &GevSpec::new("m1", &["z"], &["z"]), &opts).unwrap();
        assert!((m0.log_likelihood - m1.log_likelihood).abs() < 1e-6);
    }

    #[test]
    fn minima_are_negated_internally() {
        let data = sample(200, 0.0, 1.0, -0.2, 8);
        let minima: Vec<f64> = data.iter().map(|v| -v).collect();
        let as_min = BlockSeries::from_values(JAN2000, &minima, Orientation::Minima).unwrap();
        let as_max = BlockSeries::from_values(JAN2000, &data, Orientation::Maxima).unwrap();
        let opts = GevFitOptions::default();
        let a = fit_gev(&as_min, &GevSpec::stationary("m"), &opts).unwrap();
        let b = fit_gev(&as_max, &GevSpec::stationary("m"), &opts).unwrap();
        assert_eq!(a.log_likelihood, b.log_likelihood);
        assert_eq!(a.params, b.params);
        assert_eq!(a.orientation, Orientation::Minima);
    }

    #[test]
    fn too_few_blocks() {
        let blocks = BlockSeries::from_values(JAN2000, &[1.0, 2.0, 3.0, 4.0, 5.0], Orientation::Maxima).unwrap();
        assert!(matches!(
            fit_gev(&blocks, &GevSpec::stationary("m"), &GevFitOptions::default()),
            Err(EvtError::InsufficientBlocks { have: 5, need: 6 })
        ));
    }

    #[test]
    fn external_map_inverts_standardization() {
        // mu = a0 + a1 (x - 3)/2  ==  (a0 - 1.5 a1) + (a1/2) x
        let a = external_map(&[(3.0, 2.0)], &[]);
        let ext = &a * nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.5, 0.1]);
        assert_eq!(ext.as_slice(), &[1.0 - 6.0, 2.0, 0.5, 0.1]);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let data = sample(150, 1.0, 0.5, 0.1, 13);
        let blocks = BlockSeries::from_values(JAN2000, &data, Orientation::Maxima)
            .unwrap()
            .with_time_index(JAN2000)
            .unwrap();
        let spec = GevSpec::new("m1", &["t"], &["t"]);
        let seq = fit_gev(&blocks, &spec, &GevFitOptions { execution: Execution::Sequential, ..Default::default() }).unwrap();
        let par = fit_gev(&blocks, &spec, &GevFitOptions { execution: Execution::Parallel, ..Default::default() }).unwrap();
        assert_eq!(seq, par);
    }
}
