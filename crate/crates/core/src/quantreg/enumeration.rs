//! Exact solutions through basic (interpolating) coefficient vectors.
//!
//! Some minimizer of the pinball objective passes exactly through `p` data
//! points, where `p` is the number of coefficients. Solving the `p x p` system
//! for a subset of rows gives one such candidate.

use nalgebra::{DMatrix, DVector};

use super::objective;

/// Calls `visit` with every `k`-subset of `items`, in lexicographic order.
pub(crate) fn for_each_subset(items: &[usize], k: usize, mut visit: impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut subset: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
    loop {
        visit(&subset);
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in pos..k {
            subset[j] = items[idx[j]];
        }
    }
}

/// Coefficients interpolating the rows in `basis`, if that system is nonsingular.
pub(crate) fn basis_solution(x: &DMatrix<f64>, y: &DVector<f64>, basis: &[usize]) -> Option<DVector<f64>> {
    let p = x.ncols();
    let xb = DMatrix::from_fn(p, p, |i, j| x[(basis[i], j)]);
    let yb = DVector::from_fn(p, |i, _| y[basis[i]]);
    // Row-scaled determinant test rejects numerically singular bases.
    let scale: f64 = xb
        .row_iter()
        .map(|r| r.amax().max(1.0))
        .product();
    let lu = xb.lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= 1e-12 * scale {
        return None;
    }
    lu.solve(&yb)
}

/// Best basic solution over all `p`-subsets drawn from `rows`.
pub(crate) fn best_basis(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    rows: &[usize],
) -> Option<(DVector<f64>, f64)> {
    let mut best: Option<(DVector<f64>, f64)> = None;
    for_each_subset(rows, x.ncols(), |basis| {
        if let Some(beta) = basis_solution(x, y, basis) {
            let obj = objective(x, y, &beta, tau);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((beta, obj));
            }
        }
    });
    best
}

/// Exhaustive search over every basis; exact but `O(C(n, p) * n)`.
pub(crate) fn enumerate_all(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Option<(DVector<f64>, f64)> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    best_basis(x, y, tau, &rows)
}
