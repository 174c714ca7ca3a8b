//! Linear quantile regression.
//!
//! Coefficients minimize the pinball (check) loss
//! `sum_i rho_tau(y_i - x_i' b)`. The primary solver is the Frisch–Newton
//! interior point method; its answer is then snapped to the best nearby basic
//! solution, which makes results exact whenever the optimum is a vertex. Small
//! problems fall back to exhaustive basis enumeration if the interior point
//! iteration fails. Goodness of fit is the pseudo R² of the fit against an
//! intercept-only model at the same `tau`; standard errors come from a pairs
//! bootstrap.

mod bootstrap;
pub(crate) mod enumeration;
mod interior_point;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::par::Execution;

pub use bootstrap::bootstrap_standard_errors;

/// Relative duality-gap tolerance for the interior point solver.
pub const GAP_TOLERANCE: f64 = 1e-9;
/// Largest problem that may fall back to exhaustive basis enumeration.
pub const ENUMERATION_LIMIT: usize = 200;
const MAX_IP_ITERATIONS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum QuantRegError {
    #[error("tau = {0} is outside (0, 1)")]
    InvalidTau(f64),
    #[error("design is rank deficient: {dependent:?} linearly dependent on earlier columns")]
    RankDeficient { dependent: Vec<String> },
    #[error("need at least {needed} observations, have {have}")]
    TooFewObservations { needed: usize, have: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("design has {design} rows but response has {response}")]
    LengthMismatch { design: usize, response: usize },
    #[error("first design column must be the intercept (all ones)")]
    MissingIntercept,
    #[error("solver did not converge after {iterations} iterations (gap {gap:e}): {reason}")]
    NoConvergence {
        iterations: usize,
        gap: f64,
        reason: &'static str,
    },
    #[error("restricted objective is zero (constant response); pseudo R² is undefined")]
    ZeroRestrictedObjective,
    #[error("bootstrap produced {0} usable replicates; at least 2 are needed")]
    BootstrapFailed(usize),
    #[error("empty response")]
    EmptyResponse,
}

/// `tau * z` for `z >= 0`, `(tau - 1) * z` otherwise.
pub fn pinball_loss(z: f64, tau: f64) -> Result<f64, QuantRegError> {
    check_tau(tau)?;
    Ok(rho(z, tau))
}

#[inline]
pub(crate) fn rho(z: f64, tau: f64) -> f64 {
    if z >= 0.0 {
        tau * z
    } else {
        (tau - 1.0) * z
    }
}

fn check_tau(tau: f64) -> Result<(), QuantRegError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(QuantRegError::InvalidTau(tau))
    }
}

pub(crate) fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    (y - x * beta).iter().map(|&r| rho(r, tau)).sum()
}

/// Response plus an `n x p` design whose first column is the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileProblem {
    response: DVector<f64>,
    design: DMatrix<f64>,
    names: Vec<String>,
}

impl QuantileProblem {
    /// Builds the design from covariate columns, prepending an intercept named `intercept`.
    pub fn new(response: Vec<f64>, covariates: &[(&str, Vec<f64>)]) -> Result<Self, QuantRegError> {
        let n = response.len();
        for (_, col) in covariates {
            if col.len() != n {
                return Err(QuantRegError::LengthMismatch {
                    design: col.len(),
                    response: n,
                });
            }
        }
        let p = covariates.len() + 1;
        let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1].1[i] });
        let mut names = vec!["intercept".to_string()];
        names.extend(covariates.iter().map(|(name, _)| name.to_string()));
        Self::from_design(DVector::from_vec(response), design, names)
    }

    pub fn from_design(
        response: DVector<f64>,
        design: DMatrix<f64>,
        names: Vec<String>,
    ) -> Result<Self, QuantRegError> {
        let (n, p) = design.shape();
        if n != response.len() {
            return Err(QuantRegError::LengthMismatch {
                design: n,
                response: response.len(),
            });
        }
        if n < p {
            return Err(QuantRegError::TooFewObservations { needed: p, have: n });
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(QuantRegError::NonFinite("response"));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(QuantRegError::NonFinite("design"));
        }
        if p == 0 || design.column(0).iter().any(|&v| v != 1.0) {
            return Err(QuantRegError::MissingIntercept);
        }
        let names = if names.len() == p {
            names
        } else {
            (0..p).map(|j| format!("x{j}")).collect()
        };
        let problem = QuantileProblem {
            response,
            design,
            names,
        };
        problem.check_rank()?;
        Ok(problem)
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_obs(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_coefficients(&self) -> usize {
        self.design.ncols()
    }

    /// Modified Gram–Schmidt; a column whose residual after projecting out
    /// earlier independent columns is negligible is reported as dependent.
    fn check_rank(&self) -> Result<(), QuantRegError> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut dependent = Vec::new();
        for j in 0..self.design.ncols() {
            let col = self.design.column(j).into_owned();
            let norm = col.norm();
            let mut v = col;
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
            let rest = v.norm();
            if norm == 0.0 || rest <= 1e-10 * norm {
                dependent.push(self.names[j].clone());
            } else {
                basis.push(v / rest);
            }
        }
        if dependent.is_empty() {
            Ok(())
        } else {
            Err(QuantRegError::RankDeficient { dependent })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Interior point solution snapped to a basic solution.
    Vertex,
    /// Interior point solution used as-is.
    InteriorPoint,
    /// Exhaustive basis enumeration after interior point failure.
    Enumeration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub coefficients: DVector<f64>,
    pub objective: f64,
    pub path: SolverPath,
    pub iterations: usize,
}

/// Minimizes the pinball objective for a single `tau`.
pub fn solve(problem: &QuantileProblem, tau: f64) -> Result<Solution, QuantRegError> {
    check_tau(tau)?;
    let x = &problem.design;
    let y = &problem.response;
    match interior_point::frisch_newton(x, y, tau, GAP_TOLERANCE, MAX_IP_ITERATIONS) {
        Ok(ip) => {
            let ip_obj = objective(x, y, &ip.beta, tau);
            let mut order: Vec<usize> = (0..x.nrows()).collect();
            let resid = y - x * &ip.beta;
            order.sort_by(|&i, &j| resid[i].abs().total_cmp(&resid[j].abs()).then(i.cmp(&j)));
            order.truncate((x.ncols() + 3).min(x.nrows()));
            let snapped = enumeration::best_basis(x, y, tau, &order);
            let slack = GAP_TOLERANCE * (1.0 + ip_obj.abs());
            Ok(match snapped {
                Some((beta, obj)) if obj <= ip_obj + slack => Solution {
                    coefficients: beta,
                    objective: obj,
                    path: SolverPath::Vertex,
                    iterations: ip.iterations,
                },
                _ => Solution {
                    coefficients: ip.beta,
                    objective: ip_obj,
                    path: SolverPath::InteriorPoint,
                    iterations: ip.iterations,
                },
            })
        }
        Err(failure) if x.nrows() <= ENUMERATION_LIMIT => enumeration::enumerate_all(x, y, tau)
            .map(|(beta, obj)| Solution {
                coefficients: beta,
                objective: obj,
                path: SolverPath::Enumeration,
                iterations: failure.iterations,
            })
            .ok_or(QuantRegError::NoConvergence {
                iterations: failure.iterations,
                gap: failure.gap,
                reason: failure.reason,
            }),
        Err(failure) => Err(QuantRegError::NoConvergence {
            iterations: failure.iterations,
            gap: failure.gap,
            reason: failure.reason,
        }),
    }
}

/// Minimum over a constant `b0` of `sum rho_tau(y_i - b0)`; attained at the
/// order statistic `y_(ceil(n * tau))`.
pub fn restricted_fit(response: &[f64], tau: f64) -> Result<f64, QuantRegError> {
    check_tau(tau)?;
    if response.is_empty() {
        return Err(QuantRegError::EmptyResponse);
    }
    let mut sorted = response.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((n as f64 * tau).ceil() as usize).clamp(1, n);
    let b0 = sorted[k - 1];
    Ok(response.iter().map(|&y| rho(y - b0, tau)).sum())
}

/// `1 - fit / restricted`.
pub fn pseudo_r2(fit_objective: f64, restricted_objective: f64) -> Result<f64, QuantRegError> {
    if restricted_objective <= 0.0 {
        return Err(QuantRegError::ZeroRestrictedObjective);
    }
    Ok(1.0 - fit_objective / restricted_objective)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Pairs-bootstrap replicates; `0` skips standard errors.
    pub bootstrap_replicates: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bootstrap_replicates: 1000,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapMeta {
    pub replicates: usize,
    pub usable: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantileFit {
    pub tau: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Bootstrap standard deviations; `None` when no replicates were requested.
    pub std_errors: Option<Vec<f64>>,
    pub objective: f64,
    pub restricted_objective: f64,
    pub pseudo_r2: f64,
    pub n_obs: usize,
    pub solver: SolverPath,
    pub bootstrap: BootstrapMeta,
}

impl QuantileFit {
    /// Fitted quantile at covariate values `x` (without the intercept entry).
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

pub fn fit(problem: &QuantileProblem, tau: f64, options: &FitOptions) -> Result<QuantileFit, QuantRegError> {
    let solution = solve(problem, tau)?;
    let restricted = restricted_fit(problem.response.as_slice(), tau)?;
    // An intercept that already fits every point leaves nothing to explain.
    let r2 = if restricted == 0.0 {
        0.0
    } else {
        pseudo_r2(solution.objective, restricted)?
    };
    let (std_errors, usable) = if options.bootstrap_replicates == 0 {
        (None, 0)
    } else {
        let (se, usable) = bootstrap_standard_errors(
            problem,
            tau,
            options.bootstrap_replicates,
            options.seed,
            options.execution,
        )?;
        (Some(se), usable)
    };
    Ok(QuantileFit {
        tau,
        names: problem.names.clone(),
        coefficients: solution.coefficients.iter().copied().collect(),
        std_errors,
        objective: solution.objective,
        restricted_objective: restricted,
        pseudo_r2: r2,
        n_obs: problem.n_obs(),
        solver: solution.path,
        bootstrap: BootstrapMeta {
            replicates: options.bootstrap_replicates,
            usable,
            seed: options.seed,
        },
    })
}

/// One independent fit per `tau`, sorted by `tau`. Every fit uses the same
/// bootstrap seed, so duplicated `tau` values give identical fits.
pub fn fit_profile(
    problem: &QuantileProblem,
    taus: &[f64],
    options: &FitOptions,
) -> Result<Vec<QuantileFit>, QuantRegError> {
    for &t in taus {
        check_tau(t)?;
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Bootstrap runs sequentially inside each fit; the fan-out is across tau.
    let inner = FitOptions {
        execution: Execution::Sequential,
        ..*options
    };
    options
        .execution
        .map(&sorted, |&t| fit(problem, t, &inner))
        .into_iter()
        .collect()
}
