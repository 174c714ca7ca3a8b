//! Derivative-free minimization: Nelder–Mead simplex with multi-start.

use crate::par::Execution;

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when every vertex is within this relative distance of the best one.
    pub diameter_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evaluations: 20_000,
            diameter_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn relative_diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
        .fold(0.0, f64::max)
}

/// Adaptive Nelder–Mead (dimension-dependent coefficients) from `start`, with
/// the initial simplex offset along each axis by `steps[i]`.
pub fn nelder_mead<F>(f: &F, start: &[f64], steps: &[f64], options: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = start.len();
    let nf = n as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let (rho, sigma) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let rho = if n == 1 { 0.5 } else { rho };
    let sigma = if n == 1 { 0.5 } else { sigma };

    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += if steps[i] != 0.0 { steps[i] } else { 0.05 * (1.0 + start[i].abs()) };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let flat = spread.is_finite() && spread <= 1e-15 * (1.0 + values[0].abs());
        if relative_diameter(&simplex) < options.diameter_tolerance || flat {
            return Minimum {
                x: simplex.swap_remove(0),
                value: values[0],
                evaluations: evaluations.get(),
                iterations,
                converged: true,
            };
        }
        if evaluations.get() >= options.max_evaluations {
            return Minimum {
                x: simplex.swap_remove(0),
                value: values[0],
                evaluations: evaluations.get(),
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(alpha * gamma);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(alpha * rho);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-rho);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            values[i] = eval(&simplex[i]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiStartResult {
    pub best: Minimum,
    /// One entry per start, in input order, before polishing.
    pub runs: Vec<Minimum>,
    pub polish_rounds: usize,
}

/// Runs Nelder–Mead from every start, then restarts from the best point with a
/// fresh simplex until a restart no longer improves the value.
pub fn multistart<F>(
    f: &F,
    starts: &[Vec<f64>],
    steps: &[f64],
    options: &NelderMeadOptions,
    execution: Execution,
) -> MultiStartResult
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    assert!(!starts.is_empty(), "multistart needs at least one start");
    let runs = execution.map(starts, |s| nelder_mead(f, s, steps, options));
    let mut best = runs
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .expect("non-empty");
    let mut polish_rounds = 0;
    for _ in 0..5 {
        let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
        let again = nelder_mead(f, &best.x, &small, options);
        polish_rounds += 1;
        let improved = again.value < best.value - 1e-12 * (1.0 + best.value.abs());
        let converged = again.converged;
        if again.value <= best.value {
            let evaluations = best.evaluations + again.evaluations;
            best = Minimum { evaluations, ..again };
        }
        if !improved && converged {
            break;
        }
    }
    MultiStartResult {
        best,
        runs,
        polish_rounds,
    }
}
