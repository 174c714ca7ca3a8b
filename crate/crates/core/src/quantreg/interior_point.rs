//! Frisch–Newton primal-dual interior point method for the quantile
//! regression linear program.
//!
//! Works on the bounded dual
//!
//! ```text
//! max  y'a   s.t.  X'a = (1 - tau) X'1,   0 <= a <= 1
//! ```
//!
//! whose equality multipliers are the regression coefficients. The start
//! `a = 1 - tau` is exactly primal feasible and the start `beta = OLS` is made
//! dual feasible by splitting the residual into its positive and negative
//! parts, so both residuals stay at round-off level for the whole run and the
//! iteration only has to close the complementarity gap. Steps use Mehrotra's
//! predictor-corrector rule.

use nalgebra::{DMatrix, DVector};

const STEP_SHRINK: f64 = 0.99995;

#[derive(Clone, Debug)]
pub(crate) struct IpSolution {
    pub beta: DVector<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct IpFailure {
    pub iterations: usize,
    pub gap: f64,
    pub reason: &'static str,
}

fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn frisch_newton(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    gap_tolerance: f64,
    max_iterations: usize,
) -> Result<IpSolution, IpFailure> {
    let n = x.nrows();
    let ones = DVector::from_element(n, 1.0);
    let rhs = x.transpose() * &ones * (1.0 - tau);

    let mut a = DVector::from_element(n, 1.0 - tau);
    let mut s = DVector::from_element(n, tau);

    let xtx = x.transpose() * x;
    let mut beta = xtx
        .cholesky()
        .ok_or(IpFailure {
            iterations: 0,
            gap: f64::NAN,
            reason: "singular design in least-squares start",
        })?
        .solve(&(x.transpose() * y));
    let r = y - x * &beta;
    let scale = 1.0 + r.amax();
    let shift = 1e-2 * scale;
    let mut w = r.map(|v| v.max(0.0) + shift);
    let mut z = r.map(|v| (-v).max(0.0) + shift);

    let mut gap = a.dot(&z) + s.dot(&w);
    for iteration in 0..max_iterations {
        let resid = y - x * &beta;
        let objective: f64 = resid
            .iter()
            .map(|&u| if u >= 0.0 { tau * u } else { (tau - 1.0) * u })
            .sum();
        if gap <= gap_tolerance * (1.0 + objective.abs()) {
            return Ok(IpSolution {
                beta,
                iterations: iteration,
            });
        }

        let rp = &rhs - x.transpose() * &a;
        let rd = &resid - &w + &z;
        let d = z.component_div(&a) + w.component_div(&s);
        let d_inv = d.map(|v| 1.0 / v);
        let mut xd = x.clone();
        for (mut row, di) in xd.row_iter_mut().zip(d_inv.iter()) {
            row *= *di;
        }
        let normal = x.transpose() * &xd;
        let chol = normal.cholesky().ok_or(IpFailure {
            iterations: iteration,
            gap,
            reason: "normal equations lost positive definiteness",
        })?;

        let direction = |t1: &DVector<f64>, t2: &DVector<f64>| {
            let r_hat = &rd - t2.component_div(&s) + t1.component_div(&a);
            let db = chol.solve(&(xd.transpose() * &r_hat - &rp));
            let da = (&r_hat - x * &db).component_mul(&d_inv);
            let dz = (t1 - z.component_mul(&da)).component_div(&a);
            let dw = (t2 + w.component_mul(&da)).component_div(&s);
            (db, da, dz, dw)
        };

        // Predictor.
        let t1 = -a.component_mul(&z);
        let t2 = -s.component_mul(&w);
        let (_, da, dz, dw) = direction(&t1, &t2);
        let ds = -&da;
        let ap = max_step(&a, &da).min(max_step(&s, &ds)).min(1.0);
        let ad = max_step(&z, &dz).min(max_step(&w, &dw)).min(1.0);
        let gap_aff = (&a + &da * ap).dot(&(&z + &dz * ad)) + (&s + &ds * ap).dot(&(&w + &dw * ad));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let mu = sigma * gap / (2 * n) as f64;

        // Corrector.
        let t1 = DVector::from_element(n, mu) - a.component_mul(&z) - da.component_mul(&dz);
        let t2 = DVector::from_element(n, mu) - s.component_mul(&w) - ds.component_mul(&dw);
        let (db, da, dz, dw) = direction(&t1, &t2);
        let ds = -&da;
        let ap = (STEP_SHRINK * max_step(&a, &da).min(max_step(&s, &ds))).min(1.0);
        let ad = (STEP_SHRINK * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);

        a += &da * ap;
        s += &ds * ap;
        beta += &db * ad;
        z += &dz * ad;
        w += &dw * ad;

        let new_gap = a.dot(&z) + s.dot(&w);
        if !new_gap.is_finite() {
            return Err(IpFailure {
                iterations: iteration + 1,
                gap: new_gap,
                reason: "non-finite duality gap",
            });
        }
        gap = new_gap;
    }
    Err(IpFailure {
        iterations: max_iterations,
        gap,
        reason: "iteration limit reached",
    })
}
