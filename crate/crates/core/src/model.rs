//! Pair weights, the exact and smoothed l0-penalized least-squares objectives,
//! the ridge objective, and their derivative oracles.
//!
//! All objectives share the form
//!
//! ```text
//! sum_i |x_i - z_i|^2 + lambda * sum_{i<j} w_ij * P(z_i - z_j)
//! ```
//!
//! with `P` the step function (exact), `1 - exp(-alpha |u|^2)` (smooth) or
//! `|u|^2` (ridge). Every pair term is computed once and scattered to both
//! blocks, so one evaluation costs `O(m^2 n)`.

use ndarray::Array2;

use crate::data::Dataset;
use crate::error::{FilterError, Result};

/// Above this exponent `exp(-x)` is below 5e-18 and `1 - exp(-x)` rounds to 1.
const EXP_CUTOFF: f64 = 40.0;

/// Default decay rate of the Gaussian pair weights.
pub const DEFAULT_THETA: f64 = 0.1;

/// Symmetric nonnegative pair weights, packed upper-triangular by `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    m: usize,
    values: Vec<f64>,
    theta: f64,
}

#[inline]
fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// `(1 - e^-x, e^-x)` with a single transcendental call, accurate for small
/// and large `x`.
#[inline]
fn decay(x: f64) -> (f64, f64) {
    if x < 0.5 {
        let t = -(-x).exp_m1();
        (t, 1.0 - t)
    } else {
        let e = (-x).exp();
        (1.0 - e, e)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl PairWeights {
    /// `w_ij = exp(-theta |x_i - x_j|^2)`.
    pub fn gaussian(points: &Array2<f64>, theta: f64) -> Self {
        let m = points.nrows();
        let x = points.as_standard_layout();
        let x = x.as_slice().expect("standard layout");
        let n = points.ncols();
        let mut values = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            let xi = &x[i * n..(i + 1) * n];
            for j in (i + 1)..m {
                values.push((-theta * sq_dist(xi, &x[j * n..(j + 1) * n])).exp());
            }
        }
        Self { m, values, theta }
    }

    /// Every pair gets the same weight.
    pub fn constant(m: usize, w: f64) -> Self {
        Self {
            m,
            values: vec![w; m * m.saturating_sub(1) / 2],
            theta: f64::NAN,
        }
    }

    /// Builds weights from an explicit packed vector.
    pub fn from_packed(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m.saturating_sub(1) / 2 {
            return Err(FilterError::InvalidArgument(format!(
                "{} packed weights for {m} samples",
                values.len()
            )));
        }
        if values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(FilterError::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            m,
            values,
            theta: f64::NAN,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Weight of the pair `(i, j)`, in either order. Zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.values[pair_index(self.m, i, j)],
            std::cmp::Ordering::Greater => self.values[pair_index(self.m, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn packed(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Gaussian pair weights on the dataset's coordinates.
pub fn compute_weights(data: &Dataset, theta: f64) -> Result<PairWeights> {
    if data.len() < 2 {
        return Err(FilterError::InvalidDataset(
            "pair weights need at least two samples".into(),
        ));
    }
    if !(theta > 0.0) {
        return Err(FilterError::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    Ok(PairWeights::gaussian(data.points(), theta))
}

/// One centroid per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidState {
    z: Array2<f64>,
}

impl CentroidState {
    pub fn new(z: Array2<f64>) -> Self {
        Self {
            z: z.as_standard_layout().into_owned(),
        }
    }

    /// Centroids initialised at the samples themselves.
    pub fn at_samples(data: &Dataset) -> Self {
        Self::new(data.points().clone())
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn into_array(self) -> Array2<f64> {
        self.z
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }
}

/// Data, weights and penalty shared by the exact, smooth and ridge objectives.
#[derive(Debug, Clone, Copy)]
pub struct PenalizedProblem<'a> {
    pub points: &'a Array2<f64>,
    pub weights: &'a PairWeights,
    pub lambda: f64,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new(data: &'a Dataset, weights: &'a PairWeights, lambda: f64) -> Result<Self> {
        Self::from_points(data.points(), weights, lambda)
    }

    pub fn from_points(
        points: &'a Array2<f64>,
        weights: &'a PairWeights,
        lambda: f64,
    ) -> Result<Self> {
        if weights.num_samples() != points.nrows() {
            return Err(FilterError::InvalidArgument(format!(
                "weights cover {} samples, data has {}",
                weights.num_samples(),
                points.nrows()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(FilterError::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Self {
            points,
            weights,
            lambda,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.points.dim()
    }

    pub fn with_alpha(self, alpha: f64) -> Result<SmoothProblem<'a>> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(FilterError::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(SmoothProblem {
            base: self,
            alpha,
            multiplicity: None,
        })
    }

    fn check(&self, z: &Array2<f64>) -> Result<()> {
        check_shape(self.shape(), z.dim())
    }
}

/// The smooth surrogate at a fixed sharpness `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothProblem<'a> {
    pub base: PenalizedProblem<'a>,
    pub alpha: f64,
    /// Row `i` stands for this many identical samples when set. Gradients
    /// and Hessian products are then reported per sample, and the solver's
    /// inner products weight rows by these counts.
    pub multiplicity: Option<&'a [f64]>,
}

impl<'a> SmoothProblem<'a> {
    pub fn with_multiplicity(mut self, counts: &'a [f64]) -> Result<Self> {
        if counts.len() != self.base.points.nrows() || counts.iter().any(|&c| !(c > 0.0)) {
            return Err(FilterError::InvalidArgument(
                "multiplicities must be positive, one per row".into(),
            ));
        }
        self.multiplicity = Some(counts);
        Ok(self)
    }

    fn counts(&self) -> std::borrow::Cow<'a, [f64]> {
        match self.multiplicity {
            Some(c) => std::borrow::Cow::Borrowed(c),
            None => std::borrow::Cow::Owned(vec![1.0; self.base.points.nrows()]),
        }
    }
}

/// The ridge (squared l2) objective.
#[derive(Debug, Clone, Copy)]
pub struct RidgeProblem<'a> {
    pub base: PenalizedProblem<'a>,
}

fn check_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(FilterError::ShapeMismatch { expected, actual })
    }
}

fn weighted_least_squares(points: &Array2<f64>, z: &Array2<f64>, counts: &[f64]) -> f64 {
    points
        .outer_iter()
        .zip(z.outer_iter())
        .zip(counts)
        .map(|((x, c), &k)| {
            k * x
                .iter()
                .zip(c.iter())
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
        })
        .sum()
}

fn least_squares(points: &Array2<f64>, z: &Array2<f64>) -> f64 {
    points
        .iter()
        .zip(z.iter())
        .map(|(x, c)| (x - c) * (x - c))
        .sum()
}

/// Calls `f(i, j, w_ij, zi, zj)` for every pair `i < j`.
#[inline]
fn for_each_pair<F>(weights: &PairWeights, z: &[f64], n: usize, mut f: F)
where
    F: FnMut(usize, usize, f64, &[f64], &[f64]),
{
    let m = weights.m;
    let mut k = 0;
    for i in 0..m {
        let zi = &z[i * n..(i + 1) * n];
        for j in (i + 1)..m {
            f(i, j, weights.values[k], zi, &z[j * n..(j + 1) * n]);
            k += 1;
        }
    }
}

fn standard(z: &Array2<f64>) -> std::borrow::Cow<'_, [f64]> {
    match z.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(z.iter().copied().collect()),
    }
}

/// Exact objective: squared residuals plus `lambda` times the weighted count of
/// distinct centroid pairs.
pub fn eval_l0_objective(problem: &PenalizedProblem<'_>, z: &Array2<f64>) -> Result<f64> {
    problem.check(z)?;
    let n = z.ncols();
    let zs = standard(z);
    let mut penalty = 0.0;
    for_each_pair(problem.weights, &zs, n, |_, _, w, zi, zj| {
        let step = if zi == zj { 0.0 } else { 1.0 };
        penalty += w * step;
    });
    Ok(least_squares(problem.points, z) + problem.lambda * penalty)
}

/// Smooth surrogate `g(z; alpha)`.
pub fn eval_smooth_objective(problem: &SmoothProblem<'_>, z: &Array2<f64>) -> Result<f64> {
    problem.base.check(z)?;
    Ok(smooth_value(problem, z))
}

fn smooth_value(problem: &SmoothProblem<'_>, z: &Array2<f64>) -> f64 {
    let n = z.ncols();
    let zs = standard(z);
    let alpha = problem.alpha;
    let counts = problem.counts();
    let mut penalty = 0.0;
    for_each_pair(problem.base.weights, &zs, n, |i, j, w, zi, zj| {
        let x = alpha * sq_dist(zi, zj);
        let term = if x > EXP_CUTOFF { 1.0 } else { -(-x).exp_m1() };
        penalty += w * (counts[i] * counts[j]) * term;
    });
    weighted_least_squares(problem.base.points, z, &counts) + problem.base.lambda * penalty
}

fn smooth_value_and_gradient(problem: &SmoothProblem<'_>, z: &Array2<f64>) -> (f64, Array2<f64>) {
    let (v, g, _) = smooth_sweep(problem, z, Want::Gradient);
    (v, g.expect("gradient requested"))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Want {
    Value,
    Gradient,
    Hessian,
}

/// Evaluates the smooth surrogate row by row. Coordinates are stored by
/// column so the inner loops run over contiguous partners `j > i`.
fn smooth_sweep(
    problem: &SmoothProblem<'_>,
    z: &Array2<f64>,
    want: Want,
) -> (f64, Option<Array2<f64>>, Option<SmoothHessian>) {
    let (m, n) = z.dim();
    let alpha = problem.alpha;
    let lambda = problem.base.lambda;
    let scale = 2.0 * lambda * alpha;
    let w = problem.base.weights.packed();
    let counts = problem.counts();
    let mut zt = vec![0.0; m * n];
    for ((i, h), &v) in z.indexed_iter() {
        zt[h * m + i] = v;
    }
    let with_grad = want >= Want::Gradient && scale > 0.0;
    let with_hess = want == Want::Hessian && scale > 0.0;
    let mut gt = vec![0.0; if want >= Want::Gradient { m * n } else { 0 }];
    let mut packed = Vec::with_capacity(if with_hess { w.len() } else { 0 });
    let mut d2 = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut penalty = 0.0;
    let mut k0 = 0;
    for i in 0..m {
        let len = m - i - 1;
        let d2 = &mut d2[..len];
        d2.fill(0.0);
        for h in 0..n {
            let zi = zt[h * m + i];
            for (d, &zj) in d2.iter_mut().zip(&zt[h * m + i + 1..(h + 1) * m]) {
                let u = zi - zj;
                *d += u * u;
            }
        }
        let wr = &w[k0..k0 + len];
        k0 += len;
        let ci = counts[i];
        let cj = &counts[i + 1..];
        if !with_grad {
            for ((&d, &wij), &cj) in d2.iter().zip(wr).zip(cj) {
                let x = alpha * d;
                let wij = wij * (ci * cj);
                penalty += if x > EXP_CUTOFF {
                    wij
                } else {
                    wij * decay(x).0
                };
            }
            continue;
        }
        let cr = &mut c[..len];
        for (((cv, &d), &wij), &cj) in cr.iter_mut().zip(d2.iter()).zip(wr).zip(cj) {
            let x = alpha * d;
            if x > EXP_CUTOFF {
                penalty += wij * (ci * cj);
                *cv = 0.0;
            } else {
                let (t, e) = decay(x);
                penalty += wij * (ci * cj) * t;
                *cv = scale * wij * e;
            }
        }
        for h in 0..n {
            let zi = zt[h * m + i];
            let zcol = &zt[h * m + i + 1..(h + 1) * m];
            let (head, tail) = gt.split_at_mut(h * m + i + 1);
            let mut acc = 0.0;
            for (((g, &zj), &cv), &cj) in tail[..len].iter_mut().zip(zcol).zip(cr.iter()).zip(cj) {
                let t = cv * (zi - zj);
                acc += t * cj;
                *g -= t * ci;
            }
            head[h * m + i] += acc;
        }
        if with_hess {
            packed.extend_from_slice(cr);
        }
    }
    let xs = problem.base.points;
    let value = weighted_least_squares(xs, z, &counts) + lambda * penalty;
    if want == Want::Value {
        return (value, None, None);
    }
    let mut grad = Array2::from_shape_fn((m, n), |(i, h)| gt[h * m + i]);
    ndarray::Zip::from(&mut grad)
        .and(z)
        .and(xs)
        .for_each(|g, &c, &x| *g += 2.0 * (c - x));
    let hessian = (want == Want::Hessian).then(|| {
        if !with_hess {
            packed = vec![0.0; w.len()];
        }
        SmoothHessian::new(m, n, 2.0 * alpha, zt, counts.into_owned(), packed)
    });
    (value, Some(grad), hessian)
}

/// Analytic gradient of `g(z; alpha)`.
pub fn grad_smooth(problem: &SmoothProblem<'_>, z: &Array2<f64>) -> Result<Array2<f64>> {
    problem.base.check(z)?;
    Ok(smooth_value_and_gradient(problem, z).1)
}

/// Hessian of `g(z; alpha)` applied to `d`, without forming the Hessian.
pub fn hessvec_smooth(
    problem: &SmoothProblem<'_>,
    z: &Array2<f64>,
    d: &Array2<f64>,
) -> Result<Array2<f64>> {
    problem.base.check(z)?;
    problem.base.check(d)?;
    Ok(problem.hessian(z).apply(d))
}

/// Ridge objective value.
pub fn eval_ridge_objective(problem: &PenalizedProblem<'_>, z: &Array2<f64>) -> Result<f64> {
    problem.check(z)?;
    Ok(ridge_value_and_gradient(problem, z, false).0)
}

/// Ridge gradient.
pub fn grad_ridge(problem: &PenalizedProblem<'_>, z: &Array2<f64>) -> Result<Array2<f64>> {
    problem.check(z)?;
    Ok(ridge_value_and_gradient(problem, z, true).1)
}

fn ridge_value_and_gradient(
    problem: &PenalizedProblem<'_>,
    z: &Array2<f64>,
    want_grad: bool,
) -> (f64, Array2<f64>) {
    let (m, n) = z.dim();
    let zs = standard(z);
    let mut grad = vec![0.0; if want_grad { m * n } else { 0 }];
    let mut penalty = 0.0;
    let scale = 2.0 * problem.lambda;
    for_each_pair(problem.weights, &zs, n, |i, j, w, zi, zj| {
        penalty += w * sq_dist(zi, zj);
        if want_grad {
            for h in 0..n {
                let t = scale * w * (zi[h] - zj[h]);
                grad[i * n + h] += t;
                grad[j * n + h] -= t;
            }
        }
    });
    let value = least_squares(problem.points, z) + problem.lambda * penalty;
    if !want_grad {
        return (value, Array2::zeros((0, 0)));
    }
    let mut grad = Array2::from_shape_vec((m, n), grad).expect("shape");
    ndarray::Zip::from(&mut grad)
        .and(z)
        .and(problem.points)
        .for_each(|g, &c, &x| *g += 2.0 * (c - x));
    (value, grad)
}

/// A twice-differentiable objective over `m x n` centroid matrices.
pub trait Objective {
    type Hessian<'h>: HessianOperator
    where
        Self: 'h;

    fn shape(&self) -> (usize, usize);

    fn value(&self, z: &Array2<f64>) -> f64;

    fn value_and_gradient(&self, z: &Array2<f64>) -> (f64, Array2<f64>);

    /// Hessian at `z`, with whatever per-point caching makes repeated
    /// products cheap.
    fn hessian(&self, z: &Array2<f64>) -> Self::Hessian<'_>;

    /// Row weights of the inner product the solver should use; `None` means
    /// the plain Euclidean one.
    fn row_metric(&self) -> Option<&[f64]> {
        None
    }

    /// Value, gradient and Hessian at `z` together.
    fn evaluate(&self, z: &Array2<f64>) -> (f64, Array2<f64>, Self::Hessian<'_>) {
        let (v, g) = self.value_and_gradient(z);
        (v, g, self.hessian(z))
    }
}

/// A symmetric linear operator on `m x n` matrices.
pub trait HessianOperator {
    fn apply(&self, d: &Array2<f64>) -> Array2<f64>;
}

impl Objective for SmoothProblem<'_> {
    type Hessian<'h>
        = SmoothHessian
    where
        Self: 'h;

    fn shape(&self) -> (usize, usize) {
        self.base.shape()
    }

    fn value(&self, z: &Array2<f64>) -> f64 {
        smooth_sweep(self, z, Want::Value).0
    }

    fn row_metric(&self) -> Option<&[f64]> {
        self.multiplicity
    }

    fn value_and_gradient(&self, z: &Array2<f64>) -> (f64, Array2<f64>) {
        smooth_value_and_gradient(self, z)
    }

    fn hessian(&self, z: &Array2<f64>) -> SmoothHessian {
        self.evaluate(z).2
    }

    fn evaluate(&self, z: &Array2<f64>) -> (f64, Array2<f64>, SmoothHessian) {
        let (v, g, h) = smooth_sweep(self, z, Want::Hessian);
        (
            v,
            g.expect("gradient requested"),
            h.expect("Hessian requested"),
        )
    }
}

#[derive(Debug, Clone)]
enum PairCoefficients {
    /// Every pair `i < j`, packed row-wise.
    Dense(Vec<f64>),
    /// Only pairs with nonzero coefficients, by row.
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        coef: Vec<f64>,
    },
}

/// Pair terms of the smooth Hessian at a fixed point. Pairs whose
/// exponential factor underflows the cutoff carry no curvature; when most
/// pairs are in that state only the rest are stored.
#[derive(Debug, Clone)]
pub struct SmoothHessian {
    m: usize,
    n: usize,
    two_alpha: f64,
    /// Centroids stored by column.
    zt: Vec<f64>,
    counts: Vec<f64>,
    pairs: PairCoefficients,
    active: usize,
}

impl SmoothHessian {
    fn new(
        m: usize,
        n: usize,
        two_alpha: f64,
        zt: Vec<f64>,
        counts: Vec<f64>,
        packed: Vec<f64>,
    ) -> Self {
        let active = packed.iter().filter(|&&c| c != 0.0).count();
        let pairs = if 4 * active >= packed.len() {
            PairCoefficients::Dense(packed)
        } else {
            let mut row_ptr = Vec::with_capacity(m + 1);
            let mut cols = Vec::with_capacity(active);
            let mut coef = Vec::with_capacity(active);
            row_ptr.push(0);
            let mut k = 0;
            for i in 0..m {
                for j in (i + 1)..m {
                    if packed[k] != 0.0 {
                        cols.push(j as u32);
                        coef.push(packed[k]);
                    }
                    k += 1;
                }
                row_ptr.push(cols.len());
            }
            PairCoefficients::Sparse {
                row_ptr,
                cols,
                coef,
            }
        };
        Self {
            m,
            n,
            two_alpha,
            zt,
            counts,
            pairs,
            active,
        }
    }

    /// Number of pairs carrying curvature.
    pub fn active_pairs(&self) -> usize {
        self.active
    }

    fn apply_dense(&self, packed: &[f64], dt: &[f64], out: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        let zt = &self.zt;
        let mut proj = vec![0.0; m];
        let mut k0 = 0;
        for i in 0..m {
            let len = m - i - 1;
            let (ci, cj) = (self.counts[i], &self.counts[i + 1..]);
            let c = &packed[k0..k0 + len];
            k0 += len;
            let proj = &mut proj[..len];
            proj.fill(0.0);
            for h in 0..n {
                let (zi, di) = (zt[h * m + i], dt[h * m + i]);
                let zc = &zt[h * m + i + 1..(h + 1) * m];
                let dc = &dt[h * m + i + 1..(h + 1) * m];
                for ((p, &zj), &dj) in proj.iter_mut().zip(zc).zip(dc) {
                    *p += (zi - zj) * (di - dj);
                }
            }
            for (p, &cv) in proj.iter_mut().zip(c) {
                *p *= cv * self.two_alpha;
            }
            for h in 0..n {
                let (zi, di) = (zt[h * m + i], dt[h * m + i]);
                let zc = &zt[h * m + i + 1..(h + 1) * m];
                let dc = &dt[h * m + i + 1..(h + 1) * m];
                let (head, tail) = out.split_at_mut(h * m + i + 1);
                let mut acc = 0.0;
                for (((((o, &zj), &dj), &cv), &p), &cj) in tail[..len]
                    .iter_mut()
                    .zip(zc)
                    .zip(dc)
                    .zip(c)
                    .zip(proj.iter())
                    .zip(cj)
                {
                    let t = cv * (di - dj) - p * (zi - zj);
                    acc += t * cj;
                    *o -= t * ci;
                }
                head[h * m + i] += acc;
            }
        }
    }

    fn apply_sparse(
        &self,
        row_ptr: &[usize],
        cols: &[u32],
        coef: &[f64],
        dt: &[f64],
        out: &mut [f64],
    ) {
        let (m, n) = (self.m, self.n);
        let zt = &self.zt;
        for i in 0..m {
            let range = row_ptr[i]..row_ptr[i + 1];
            for (&j, &c) in cols[range.clone()].iter().zip(&coef[range]) {
                let j = j as usize;
                let mut proj = 0.0;
                for h in 0..n {
                    proj += (zt[h * m + i] - zt[h * m + j]) * (dt[h * m + i] - dt[h * m + j]);
                }
                let tp = self.two_alpha * proj;
                for h in 0..n {
                    let t = c
                        * ((dt[h * m + i] - dt[h * m + j]) - tp * (zt[h * m + i] - zt[h * m + j]));
                    out[h * m + i] += t * self.counts[j];
                    out[h * m + j] -= t * self.counts[i];
                }
            }
        }
    }
}

impl HessianOperator for SmoothHessian {
    fn apply(&self, d: &Array2<f64>) -> Array2<f64> {
        let (m, n) = (self.m, self.n);
        let mut dt = vec![0.0; m * n];
        for ((i, h), &v) in d.indexed_iter() {
            dt[h * m + i] = v;
        }
        let mut out: Vec<f64> = dt.iter().map(|v| 2.0 * v).collect();
        match &self.pairs {
            PairCoefficients::Dense(packed) => self.apply_dense(packed, &dt, &mut out),
            PairCoefficients::Sparse {
                row_ptr,
                cols,
                coef,
            } => self.apply_sparse(row_ptr, cols, coef, &dt, &mut out),
        }
        Array2::from_shape_fn((m, n), |(i, h)| out[h * m + i])
    }
}

impl Objective for RidgeProblem<'_> {
    type Hessian<'h>
        = RidgeHessian<'h>
    where
        Self: 'h;

    fn shape(&self) -> (usize, usize) {
        self.base.shape()
    }

    fn value(&self, z: &Array2<f64>) -> f64 {
        ridge_value_and_gradient(&self.base, z, false).0
    }

    fn value_and_gradient(&self, z: &Array2<f64>) -> (f64, Array2<f64>) {
        ridge_value_and_gradient(&self.base, z, true)
    }

    fn hessian(&self, _z: &Array2<f64>) -> RidgeHessian<'_> {
        RidgeHessian {
            weights: self.base.weights,
            lambda: self.base.lambda,
        }
    }
}

/// `2 (I + lambda L)` with `L` the weighted graph Laplacian.
#[derive(Debug, Clone, Copy)]
pub struct RidgeHessian<'a> {
    weights: &'a PairWeights,
    lambda: f64,
}

impl HessianOperator for RidgeHessian<'_> {
    fn apply(&self, d: &Array2<f64>) -> Array2<f64> {
        let (m, n) = d.dim();
        let ds = standard(d);
        let mut out: Vec<f64> = ds.iter().map(|v| 2.0 * v).collect();
        let scale = 2.0 * self.lambda;
        for_each_pair(self.weights, &ds, n, |i, j, w, di, dj| {
            for h in 0..n {
                let t = scale * w * (di[h] - dj[h]);
                out[i * n + h] += t;
                out[j * n + h] -= t;
            }
        });
        Array2::from_shape_vec((m, n), out).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_point() -> (Array2<f64>, PairWeights) {
        let x = array![[0.0, 0.0], [1.0, 0.0]];
        let w = PairWeights::gaussian(&x, 0.1);
        (x, w)
    }

    #[test]
    fn weight_formula_and_symmetry() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]];
        let w = PairWeights::gaussian(&x, 0.1);
        assert!((w.get(0, 1) - 0.818_730_753_077_981_9).abs() < 1e-15);
        assert_eq!(w.get(0, 1), w.get(1, 0));
        assert_eq!(w.get(0, 2), 1.0);
        assert_eq!(w.get(2, 2), 0.0);
    }

    #[test]
    fn packed_index_covers_all_pairs() {
        let m = 7;
        let mut seen = vec![false; m * (m - 1) / 2];
        for i in 0..m {
            for j in (i + 1)..m {
                seen[pair_index(m, i, j)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn l0_objective_examples() {
        let (x, w) = two_point();
        let p = PenalizedProblem::from_points(&x, &w, 0.0).unwrap();
        assert_eq!(eval_l0_objective(&p, &x).unwrap(), 0.0);

        let p = PenalizedProblem::from_points(&x, &w, 1.0).unwrap();
        let z = array![[0.0, 0.0], [0.5, 0.0]];
        let v = eval_l0_objective(&p, &z).unwrap();
        assert!((v - (0.25 + (-0.1_f64).exp())).abs() < 1e-15);
        assert!((v - 1.154_837).abs() < 1e-6);

        let c = array![[0.3, 0.2], [0.3, 0.2]];
        let v = eval_l0_objective(&p, &c).unwrap();
        assert!((v - least_squares(&x, &c)).abs() < 1e-15);
    }

    #[test]
    fn smooth_objective_example() {
        let (x, w) = two_point();
        let p = PenalizedProblem::from_points(&x, &w, 1.0)
            .unwrap()
            .with_alpha(1.0)
            .unwrap();
        let v = eval_smooth_objective(&p, &x).unwrap();
        let expected = (-0.1_f64).exp() * (1.0 - (-1.0_f64).exp());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.571_966_334).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (x, w) = two_point();
        let p = PenalizedProblem::from_points(&x, &w, 1.0).unwrap();
        let z = Array2::zeros((3, 2));
        assert!(matches!(
            eval_l0_objective(&p, &z),
            Err(FilterError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn invalid_parameters() {
        let (x, w) = two_point();
        assert!(PenalizedProblem::from_points(&x, &w, -1.0).is_err());
        let p = PenalizedProblem::from_points(&x, &w, 1.0).unwrap();
        assert!(p.with_alpha(0.0).is_err());
    }

    #[test]
    fn coincident_samples_are_stationary() {
        let x = array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]];
        let w = PairWeights::gaussian(&x, 0.1);
        let p = PenalizedProblem::from_points(&x, &w, 3.0)
            .unwrap()
            .with_alpha(10.0)
            .unwrap();
        let g = grad_smooth(&p, &x).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hessvec_without_penalty_is_twice_identity() {
        let (x, w) = two_point();
        let p = PenalizedProblem::from_points(&x, &w, 0.0)
            .unwrap()
            .with_alpha(5.0)
            .unwrap();
        let d = array![[1.0, -2.0], [0.5, 3.0]];
        let hd = hessvec_smooth(&p, &x, &d).unwrap();
        assert_eq!(hd, &d * 2.0);
    }

    #[test]
    fn ridge_at_consensus() {
        let x = array![[0.0, 1.0], [2.0, -1.0], [1.0, 3.0]];
        let w = PairWeights::gaussian(&x, 0.1);
        let p = PenalizedProblem::from_points(&x, &w, 0.0).unwrap();
        assert_eq!(eval_ridge_objective(&p, &x).unwrap(), 0.0);
        assert!(grad_ridge(&p, &x).unwrap().iter().all(|&v| v == 0.0));

        let p = PenalizedProblem::from_points(&x, &w, 2.0).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let z = Array2::from_shape_fn((3, 2), |(_, h)| mean[h]);
        let g = grad_ridge(&p, &z).unwrap();
        let sums = g.sum_axis(ndarray::Axis(0));
        assert!(sums.iter().all(|v| v.abs() < 1e-12));
        // Penalty part vanishes: gradient is just the residual term.
        let residual = (&z - &x) * 2.0;
        for (a, b) in g.iter().zip(residual.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn random_points(m: usize, n: usize, seed: u64) -> Array2<f64> {
        use rand::Rng;
        let mut rng = crate::seeds::restart_rng(seed, 0);
        Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn sweep_agrees_with_reference_value() {
        let x = random_points(12, 3, 1);
        let w = PairWeights::gaussian(&x, 0.1);
        let z = random_points(12, 3, 2);
        for alpha in [0.5, 10.0, 1e3] {
            let p = PenalizedProblem::from_points(&x, &w, 0.7)
                .unwrap()
                .with_alpha(alpha)
                .unwrap();
            let reference = eval_smooth_objective(&p, &z).unwrap();
            for v in [p.value(&z), p.value_and_gradient(&z).0, p.evaluate(&z).0] {
                assert!(
                    (v - reference).abs() <= 1e-12 * reference.abs(),
                    "{v} {reference}"
                );
            }
        }
    }

    #[test]
    fn sparse_and_dense_hessians_agree() {
        // Far-apart clumps leave most pairs beyond the cutoff.
        let mut x = random_points(20, 2, 3);
        x.mapv_inplace(|v| 0.01 * v);
        for i in 0..20 {
            x[[i, 0]] += (i / 2) as f64;
        }
        let w = PairWeights::gaussian(&x, 0.1);
        let d = random_points(20, 2, 4);
        let p = PenalizedProblem::from_points(&x, &w, 1.0)
            .unwrap()
            .with_alpha(100.0)
            .unwrap();
        let h = p.hessian(&x);
        assert!(matches!(h.pairs, PairCoefficients::Sparse { .. }));
        assert!(h.active_pairs() >= 10);
        let sparse = h.apply(&d);
        let mut packed = vec![0.0; 190];
        if let PairCoefficients::Sparse {
            row_ptr,
            cols,
            coef,
        } = &h.pairs
        {
            for i in 0..20 {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    packed[pair_index(20, i, cols[k] as usize)] = coef[k];
                }
            }
        }
        let dense = SmoothHessian {
            pairs: PairCoefficients::Dense(packed),
            ..h.clone()
        };
        let full = dense.apply(&d);
        assert!((&sparse - &full).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn multiplicities_match_repeated_rows() {
        let distinct = random_points(5, 2, 5);
        let counts = [1.0, 3.0, 1.0, 2.0, 1.0];
        let expand: Vec<usize> = (0..5)
            .flat_map(|i| std::iter::repeat_n(i, counts[i] as usize))
            .collect();
        let x = distinct.select(ndarray::Axis(0), &expand);
        let z_small = random_points(5, 2, 6);
        let z = z_small.select(ndarray::Axis(0), &expand);
        let d_small = random_points(5, 2, 7);
        let d = d_small.select(ndarray::Axis(0), &expand);
        let w_full = PairWeights::gaussian(&x, 0.1);
        let w_small = PairWeights::gaussian(&distinct, 0.1);
        for alpha in [1.0, 30.0] {
            let full = PenalizedProblem::from_points(&x, &w_full, 0.4)
                .unwrap()
                .with_alpha(alpha)
                .unwrap();
            let small = PenalizedProblem::from_points(&distinct, &w_small, 0.4)
                .unwrap()
                .with_alpha(alpha)
                .unwrap()
                .with_multiplicity(&counts)
                .unwrap();
            let (vf, gf, hf) = full.evaluate(&z);
            let (vs, gs, hs) = small.evaluate(&z_small);
            assert!((vf - vs).abs() < 1e-12 * vf.abs());
            assert!(
                (vf - eval_smooth_objective(&small, &z_small).unwrap()).abs() < 1e-12 * vf.abs()
            );
            let gs = gs.select(ndarray::Axis(0), &expand);
            assert!((&gf - &gs).iter().all(|v| v.abs() < 1e-12));
            let hd = hf.apply(&d);
            let hs = hs.apply(&d_small).select(ndarray::Axis(0), &expand);
            assert!((&hd - &hs).iter().all(|v| v.abs() < 1e-11));
        }
        let p = PenalizedProblem::from_points(&distinct, &w_small, 0.4)
            .unwrap()
            .with_alpha(1.0)
            .unwrap();
        assert!(p.with_multiplicity(&[1.0; 4]).is_err());
        assert!(p.with_multiplicity(&[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }
}
