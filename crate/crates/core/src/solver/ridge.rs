//! Ridge filter: the strictly convex quadratic with a graph-Laplacian penalty.

use ndarray::{Array1, Array2};

use crate::error::{FilterError, Result};
use crate::model::{CentroidState, PairWeights, PenalizedProblem};

/// Default gradient sup-norm tolerance for the ridge solve.
pub const RIDGE_GRAD_TOL: f64 = 1e-5;

/// `(I + lambda L) v` for one coordinate column.
fn apply_system(weights: &PairWeights, lambda: f64, v: &[f64], out: &mut [f64]) {
    out.copy_from_slice(v);
    if lambda == 0.0 {
        return;
    }
    let m = v.len();
    let w = weights.packed();
    let mut k = 0;
    for i in 0..m {
        let vi = v[i];
        let mut acc = 0.0;
        for j in (i + 1)..m {
            let t = lambda * w[k] * (vi - v[j]);
            acc += t;
            out[j] -= t;
            k += 1;
        }
        out[i] += acc;
    }
}

/// Solves `(I + lambda L) z_col = x_col` for every coordinate by conjugate
/// gradients, where `L` is the weighted graph Laplacian. The ridge gradient is
/// `2 ((I + lambda L) z - x)`; iteration stops once its sup-norm is at most
/// `grad_tol`.
pub fn solve_ridge(
    points: &Array2<f64>,
    weights: &PairWeights,
    lambda: f64,
    grad_tol: f64,
) -> Result<CentroidState> {
    PenalizedProblem::from_points(points, weights, lambda)?;
    if !(grad_tol > 0.0) {
        return Err(FilterError::InvalidArgument(format!(
            "gradient tolerance must be positive, got {grad_tol}"
        )));
    }
    let (m, n) = points.dim();
    if lambda == 0.0 {
        return Ok(CentroidState::new(points.clone()));
    }
    let budget = 10 * m + 100;
    let residual_tol = 0.5 * grad_tol;
    let mut z = points.clone();
    let mut ap = vec![0.0; m];
    for h in 0..n {
        let rhs: Vec<f64> = points.column(h).to_vec();
        let mut x = rhs.clone();
        let mut r = vec![0.0; m];
        apply_system(weights, lambda, &x, &mut ap);
        for i in 0..m {
            r[i] = rhs[i] - ap[i];
        }
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let mut iterations = 0;
        loop {
            let sup = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if sup <= residual_tol {
                // Confirm against the true residual, not the recurrence.
                apply_system(weights, lambda, &x, &mut ap);
                let true_sup = rhs
                    .iter()
                    .zip(&ap)
                    .fold(0.0_f64, |a, (b, q)| a.max((b - q).abs()));
                if true_sup <= residual_tol {
                    break;
                }
                for i in 0..m {
                    r[i] = rhs[i] - ap[i];
                }
                p.copy_from_slice(&r);
                rr = r.iter().map(|v| v * v).sum();
            }
            if iterations >= budget {
                return Err(FilterError::BudgetExhausted(budget));
            }
            apply_system(weights, lambda, &p, &mut ap);
            let curvature: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let step = rr / curvature;
            for i in 0..m {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            let rr_next: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..m {
                p[i] = r[i] + beta * p[i];
            }
            iterations += 1;
        }
        z.column_mut(h).assign(&Array1::from(x));
    }
    Ok(CentroidState::new(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grad_ridge;
    use crate::solver::newton::sup_norm;
    use ndarray::array;

    #[test]
    fn zero_lambda_is_identity() {
        let x = array![[0.0, 1.0], [2.0, 3.0]];
        let w = PairWeights::gaussian(&x, 0.1);
        let z = solve_ridge(&x, &w, 0.0, 1e-5).unwrap();
        assert_eq!(z.as_array(), &x);
    }

    #[test]
    fn gradient_below_tolerance() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [-1.0, 0.5], [0.2, 0.2]];
        let w = PairWeights::gaussian(&x, 0.1);
        for lambda in [0.01, 1.0, 100.0] {
            let z = solve_ridge(&x, &w, lambda, 1e-5).unwrap();
            let p = PenalizedProblem::from_points(&x, &w, lambda).unwrap();
            assert!(sup_norm(&grad_ridge(&p, z.as_array()).unwrap()) <= 1e-5);
        }
    }

    #[test]
    fn huge_lambda_reaches_mean() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [-1.0, 0.5], [0.2, 0.2]];
        let w = PairWeights::gaussian(&x, 0.1);
        let z = solve_ridge(&x, &w, 1e6, 1e-5).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        for row in z.as_array().outer_iter() {
            for h in 0..2 {
                assert!((row[h] - mean[h]).abs() < 1e-3);
            }
        }
    }
}
