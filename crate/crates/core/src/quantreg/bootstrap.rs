use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{solve, QuantRegError, QuantileProblem};
use crate::par::Execution;
use crate::rng::replicate_rng;
use crate::stats;

/// Pairs bootstrap: resample rows with replacement, refit, and report the
/// standard deviation of each coefficient across replicates. Replicates whose
/// resampled design is rank deficient are skipped. Returns the standard errors
/// and the number of usable replicates.
pub fn bootstrap_standard_errors(
    problem: &QuantileProblem,
    tau: f64,
    replicates: usize,
    seed: u64,
    execution: Execution,
) -> Result<(Vec<f64>, usize), QuantRegError> {
    let n = problem.n_obs();
    let p = problem.n_coefficients();
    let draws: Vec<Option<Vec<f64>>> = execution.map_range(replicates, |b| {
        let mut rng = replicate_rng(seed, b as u64);
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let design = DMatrix::from_fn(n, p, |i, j| problem.design()[(rows[i], j)]);
        let response = DVector::from_fn(n, |i, _| problem.response()[rows[i]]);
        let resampled = QuantileProblem::from_design(response, design, problem.names().to_vec()).ok()?;
        solve(&resampled, tau)
            .ok()
            .map(|s| s.coefficients.iter().copied().collect())
    });
    let usable: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    if usable.len() < 2 {
        return Err(QuantRegError::BootstrapFailed(usable.len()));
    }
    let se = (0..p)
        .map(|j| {
            let col: Vec<f64> = usable.iter().map(|c| c[j]).collect();
            stats::sample_sd(&col)
        })
        .collect();
    Ok((se, usable.len()))
}
