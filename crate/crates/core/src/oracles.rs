//! Reference computations used to check the solver and the clustering
//! heuristics: convex-hull membership, finite differences, exhaustive
//! partition search and the surrogate envelope.

use ndarray::{Array2, ArrayView1};

use crate::clustering::Partition;
use crate::error::{FilterError, Result};
use crate::model::{eval_l0_objective, eval_smooth_objective, PairWeights, PenalizedProblem};

/// Convex combination of the data found by [`hull_membership`].
#[derive(Debug, Clone)]
pub struct HullCertificate {
    /// Nonnegative coefficients summing to one.
    pub theta: Vec<f64>,
    /// `|sum_i theta_i x_i - point|`.
    pub residual: f64,
}

const WOLFE_MAJOR_LIMIT: usize = 10_000;

/// Solves the bordered system `[G 1; 1' 0] [mu; nu] = [0; 1]`.
fn affine_minimizer(gram: &[f64], s: usize) -> Option<Vec<f64>> {
    let dim = s + 1;
    let mut a = vec![0.0; dim * (dim + 1)];
    let w = dim + 1;
    for i in 0..s {
        for j in 0..s {
            a[i * w + j] = gram[i * s + j];
        }
        a[i * w + s] = 1.0;
        a[s * w + i] = 1.0;
    }
    a[s * w + dim] = 1.0;
    for col in 0..dim {
        let pivot =
            (col..dim).max_by(|&p, &q| a[p * w + col].abs().total_cmp(&a[q * w + col].abs()))?;
        if a[pivot * w + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        for r in 0..dim {
            if r != col {
                let f = a[r * w + col] / a[col * w + col];
                if f != 0.0 {
                    for c in col..w {
                        a[r * w + c] -= f * a[col * w + c];
                    }
                }
            }
        }
    }
    let mu: Vec<f64> = (0..s).map(|i| a[i * w + dim] / a[i * w + i]).collect();
    mu.iter().all(|v| v.is_finite()).then_some(mu)
}

/// Minimum-norm point of the convex hull of the rows of `p` (Wolfe's
/// active-set method). Returns the convex weights.
fn min_norm_point(p: &Array2<f64>) -> Vec<f64> {
    let (m, n) = p.dim();
    let dot = |a: ArrayView1<'_, f64>, b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norms: Vec<f64> = p.outer_iter().map(|r| r.dot(&r)).collect();
    let scale = norms
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let start = (0..m)
        .min_by(|&a, &b| norms[a].total_cmp(&norms[b]))
        .expect("non-empty");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x: Vec<f64> = p.row(start).to_vec();

    let combine = |active: &[usize], lambda: &[f64]| {
        let mut x = vec![0.0; n];
        for (&i, &l) in active.iter().zip(lambda) {
            for h in 0..n {
                x[h] += l * p[[i, h]];
            }
        }
        x
    };

    for _ in 0..WOLFE_MAJOR_LIMIT {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx <= 1e-30 * scale {
            break;
        }
        let (j, best) = (0..m)
            .map(|i| (i, dot(p.row(i), &x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if xx - best <= 1e-12 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        // Minor cycles.
        loop {
            let s = active.len();
            let mut gram = vec![0.0; s * s];
            for a in 0..s {
                for b in 0..s {
                    gram[a * s + b] = p.row(active[a]).dot(&p.row(active[b]));
                }
            }
            let Some(mu) = affine_minimizer(&gram, s) else {
                // Affinely dependent support; drop the newest point.
                active.pop();
                lambda.pop();
                let total: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= total);
                return finish(m, &active, &lambda);
            };
            if mu.iter().all(|&v| v > 1e-14) {
                lambda = mu;
                x = combine(&active, &lambda);
                break;
            }
            let mut step = 1.0_f64;
            for (l, v) in lambda.iter().zip(&mu) {
                if *v <= 1e-14 {
                    let d = l - v;
                    if d > 0.0 {
                        step = step.min(l / d);
                    }
                }
            }
            for (l, v) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - step) * *l + step * v;
            }
            let mut keep = 0;
            for i in 0..active.len() {
                if lambda[i] > 1e-14 {
                    active[keep] = active[i];
                    lambda[keep] = lambda[i];
                    keep += 1;
                }
            }
            active.truncate(keep.max(1));
            lambda.truncate(keep.max(1));
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
    }
    finish(m, &active, &lambda)
}

fn finish(m: usize, active: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut theta = vec![0.0; m];
    for (&i, &l) in active.iter().zip(lambda) {
        theta[i] = l.max(0.0);
    }
    let total: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= total);
    theta
}

/// Decides whether `point` lies within `tol` of the convex hull of the rows of
/// `data`, by minimizing `|sum theta_i x_i - point|` over the simplex.
pub fn hull_membership(
    point: ArrayView1<'_, f64>,
    data: &Array2<f64>,
    tol: f64,
) -> Result<(bool, HullCertificate)> {
    if !(tol > 0.0) {
        return Err(FilterError::InvalidArgument(format!(
            "hull tolerance must be positive, got {tol}"
        )));
    }
    if data.nrows() == 0 || data.ncols() != point.len() {
        return Err(FilterError::ShapeMismatch {
            expected: (data.nrows().max(1), data.ncols()),
            actual: (1, point.len()),
        });
    }
    let shifted = data - &point;
    let theta = min_norm_point(&shifted);
    let mut combo = vec![0.0; point.len()];
    for (i, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            for (h, c) in combo.iter_mut().enumerate() {
                *c += t * data[[i, h]];
            }
        }
    }
    let residual = combo
        .iter()
        .zip(point.iter())
        .map(|(c, p)| (c - p) * (c - p))
        .sum::<f64>()
        .sqrt();
    Ok((residual <= tol, HullCertificate { theta, residual }))
}

/// Central-difference gradient of `f` at `z`.
pub fn finite_difference_gradient<F>(f: F, z: &Array2<f64>, step: f64) -> Array2<f64>
where
    F: Fn(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(z.dim());
    let mut probe = z.to_owned();
    for (idx, g) in grad.indexed_iter_mut() {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(&probe);
        probe[idx] = orig - step;
        let down = f(&probe);
        probe[idx] = orig;
        *g = (up - down) / (2.0 * step);
    }
    grad
}

/// Central difference of a gradient map along `direction`, approximating a
/// Hessian-vector product.
pub fn finite_difference_hessvec<G>(
    grad: G,
    z: &Array2<f64>,
    direction: &Array2<f64>,
    step: f64,
) -> Array2<f64>
where
    G: Fn(&Array2<f64>) -> Array2<f64>,
{
    let up = grad(&(z + &(direction * step)));
    let down = grad(&(z - &(direction * step)));
    (up - down) / (2.0 * step)
}

/// Largest number of samples [`exhaustive_partition_search`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Calls `visit` with every partition of `m` items into exactly `k` non-empty
/// blocks, in restricted-growth-string order.
pub fn for_each_partition<F>(m: usize, k: usize, mut visit: F) -> Result<usize>
where
    F: FnMut(&Partition),
{
    if m > EXHAUSTIVE_LIMIT {
        return Err(FilterError::InvalidArgument(format!(
            "exhaustive search limited to {EXHAUSTIVE_LIMIT} samples, got {m}"
        )));
    }
    crate::clustering::check_k(k, m)?;
    fn recurse<F: FnMut(&Partition)>(
        rgs: &mut Vec<usize>,
        m: usize,
        k: usize,
        used: usize,
        count: &mut usize,
        visit: &mut F,
    ) {
        let pos = rgs.len();
        if pos == m {
            if used == k {
                *count += 1;
                visit(&Partition::new(rgs.clone(), k).expect("k blocks"));
            }
            return;
        }
        // Not enough items left to open the missing blocks.
        if k - used > m - pos {
            return;
        }
        for b in 0..=used.min(k - 1) {
            rgs.push(b);
            recurse(rgs, m, k, used.max(b + 1), count, visit);
            rgs.pop();
        }
    }
    let mut count = 0;
    recurse(&mut Vec::with_capacity(m), m, k, 0, &mut count, &mut visit);
    Ok(count)
}

/// Global minimum of `objective` over all partitions of the rows of `points`
/// into `k` clusters. Ties keep the first partition in enumeration order.
pub fn exhaustive_partition_search<F>(
    points: &Array2<f64>,
    k: usize,
    mut objective: F,
) -> Result<(Partition, f64)>
where
    F: FnMut(&Array2<f64>, &Partition) -> f64,
{
    let mut best: Option<(Partition, f64)> = None;
    for_each_partition(points.nrows(), k, |p| {
        let v = objective(points, p);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((p.clone(), v));
        }
    })?;
    Ok(best.expect("at least one partition"))
}

/// Sum of squared distances to cluster means.
pub fn within_scatter(points: &Array2<f64>, partition: &Partition) -> f64 {
    let k = partition.num_clusters();
    let n = points.ncols();
    let sizes = partition.sizes();
    let mut means = Array2::<f64>::zeros((k, n));
    for (i, &c) in partition.assignment().iter().enumerate() {
        let mut row = means.row_mut(c);
        row += &points.row(i);
    }
    for (c, mut row) in means.outer_iter_mut().enumerate() {
        row /= sizes[c] as f64;
    }
    partition
        .assignment()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            points
                .row(i)
                .iter()
                .zip(means.row(c))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Feature-space scatter `sum_c [sum_{i in c} K_ii - |c|^-1 sum_{i,j in c} K_ij]`.
pub fn kernel_scatter(gram: &Array2<f64>, partition: &Partition) -> f64 {
    let a = partition.assignment();
    let sizes = partition.sizes();
    let mut within = vec![0.0; partition.num_clusters()];
    let mut diag = 0.0;
    for i in 0..a.len() {
        diag += gram[[i, i]];
        for j in 0..a.len() {
            if a[i] == a[j] {
                within[a[i]] += gram[[i, j]];
            }
        }
    }
    diag - within
        .iter()
        .zip(&sizes)
        .map(|(w, &s)| w / s as f64)
        .sum::<f64>()
}

/// Checks `g(z; alpha) <= g(z; alpha') <= phi(z)` with round-off slack
/// `1e-15 |phi(z)|`.
pub fn check_envelope_relations(
    points: &Array2<f64>,
    weights: &PairWeights,
    lambda: f64,
    z: &Array2<f64>,
    alpha: f64,
    alpha_prime: f64,
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < alpha_prime) {
        return Err(FilterError::InvalidArgument(format!(
            "need 0 < alpha < alpha', got {alpha} and {alpha_prime}"
        )));
    }
    let base = PenalizedProblem::from_points(points, weights, lambda)?;
    let phi = eval_l0_objective(&base, z)?;
    let lo = eval_smooth_objective(&base.with_alpha(alpha)?, z)?;
    let hi = eval_smooth_objective(&base.with_alpha(alpha_prime)?, z)?;
    let slack = 1e-15 * phi.abs();
    Ok(lo <= hi + slack && hi <= phi + slack)
}
