//! Truncated-Newton minimization with a conjugate-gradient inner solve and a
//! nonmonotone Armijo line search.

use std::collections::VecDeque;

use ndarray::{Array2, Zip};

use crate::error::{FilterError, Result};
use crate::model::{HessianOperator, Objective};

/// Settings for [`truncated_newton_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    /// Outer iteration cap.
    pub max_iterations: usize,
    /// Inner CG iteration cap; `None` means `10 * m * n`.
    pub cg_max_iterations: Option<usize>,
    /// Length of the nonmonotone reference window.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step reduction factor on a failed trial.
    pub backtrack: f64,
    /// Failed trials tolerated before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cg_max_iterations: None,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_halvings: 60,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0
            || !(self.armijo > 0.0 && self.armijo < 1.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
        {
            return Err(FilterError::InvalidArgument(format!(
                "invalid Newton settings: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Result of one minimization.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub z: Array2<f64>,
    pub value: f64,
    /// Objective at the starting point.
    pub initial_value: f64,
    /// Sup-norm of the gradient at `z`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub hessian_products: usize,
    /// True when the iteration cap was hit before reaching the tolerance.
    pub truncated: bool,
}

pub(crate) fn sup_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Inner product with rows weighted by `metric` when given.
fn dot(a: &Array2<f64>, b: &Array2<f64>, metric: Option<&[f64]>) -> f64 {
    match metric {
        None => match (a.as_slice(), b.as_slice()) {
            (Some(x), Some(y)) => x.iter().zip(y).map(|(p, q)| p * q).sum(),
            _ => Zip::from(a).and(b).fold(0.0, |acc, p, q| acc + p * q),
        },
        Some(w) => a
            .outer_iter()
            .zip(b.outer_iter())
            .zip(w)
            .map(|((x, y), &w)| w * x.dot(&y))
            .sum(),
    }
}

fn axpy(y: &mut Array2<f64>, a: f64, x: &Array2<f64>) {
    Zip::from(y).and(x).for_each(|y, &x| *y += a * x);
}

enum InnerStop {
    Converged,
    NegativeCurvature,
    Budget,
}

/// Approximately solves `H d = -g` by conjugate gradients.
///
/// Stops on the residual cut `min(0.5, sqrt(|g|)) |g|`, on the iteration cap,
/// or on nonpositive curvature. In the last case the current iterate is
/// returned, or `-g` if no CG step has been taken yet.
fn newton_direction<H: HessianOperator>(
    hessian: &H,
    grad: &Array2<f64>,
    metric: Option<&[f64]>,
    max_iterations: usize,
    products: &mut usize,
) -> (Array2<f64>, InnerStop) {
    let dot = |a: &Array2<f64>, b: &Array2<f64>| dot(a, b, metric);
    let gnorm = dot(grad, grad).sqrt();
    let cut = gnorm.sqrt().min(0.5) * gnorm;
    let mut x = Array2::<f64>::zeros(grad.dim());
    let mut r = grad.mapv(|v| -v);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for k in 0..max_iterations {
        let hp = hessian.apply(&p);
        *products += 1;
        let curvature = dot(&p, &hp);
        if !(curvature > 0.0) || !curvature.is_finite() {
            if k == 0 {
                return (grad.mapv(|v| -v), InnerStop::NegativeCurvature);
            }
            return (x, InnerStop::NegativeCurvature);
        }
        let step = rr / curvature;
        axpy(&mut x, step, &p);
        axpy(&mut r, -step, &hp);
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= cut {
            return (x, InnerStop::Converged);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        Zip::from(&mut p)
            .and(&r)
            .for_each(|p, &r| *p = r + beta * *p);
    }
    if max_iterations == 0 {
        return (grad.mapv(|v| -v), InnerStop::Budget);
    }
    (x, InnerStop::Budget)
}

/// Minimizes `objective` from `z0` until the gradient sup-norm is at most
/// `grad_tol`.
///
/// Accepted steps satisfy Armijo's condition against the largest objective
/// among the last `memory` iterates. When the iteration cap is reached the
/// iterate with the smallest objective is returned with `truncated` set.
pub fn truncated_newton_minimize<O: Objective>(
    objective: &O,
    z0: Array2<f64>,
    grad_tol: f64,
    config: &NewtonConfig,
) -> Result<NewtonOutcome> {
    config.validate()?;
    if !(grad_tol > 0.0) {
        return Err(FilterError::InvalidArgument(format!(
            "gradient tolerance must be positive, got {grad_tol}"
        )));
    }
    let (m, n) = objective.shape();
    if z0.dim() != (m, n) {
        return Err(FilterError::ShapeMismatch {
            expected: (m, n),
            actual: z0.dim(),
        });
    }
    let cg_cap = config.cg_max_iterations.unwrap_or(10 * m * n).max(1);
    let metric = objective.row_metric();

    let mut z = z0.as_standard_layout().into_owned();
    let (mut value, mut grad, mut hessian) = objective.evaluate(&z);
    if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite { iterations: 0 });
    }
    let initial_value = value;
    let mut grad_norm = sup_norm(&grad);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(config.memory);
    window.push_back(value);
    let mut products = 0usize;
    let mut best: Option<(Array2<f64>, f64, f64)> = None;

    for iteration in 0.. {
        if grad_norm <= grad_tol {
            return Ok(NewtonOutcome {
                z,
                value,
                initial_value,
                grad_norm,
                iterations: iteration,
                hessian_products: products,
                truncated: false,
            });
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((z.clone(), value, grad_norm));
        }
        if iteration >= config.max_iterations {
            let (z, value, grad_norm) = best.expect("at least one iterate");
            return Ok(NewtonOutcome {
                z,
                value,
                initial_value,
                grad_norm,
                iterations: iteration,
                hessian_products: products,
                truncated: true,
            });
        }

        let (mut direction, _) = newton_direction(&hessian, &grad, metric, cg_cap, &mut products);
        let mut slope = dot(&grad, &direction, metric);
        if !(slope < 0.0) {
            direction = grad.mapv(|v| -v);
            slope = -dot(&grad, &grad, metric);
        }

        let reference = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let accept =
            |v: f64, step: f64| v.is_finite() && v <= reference + config.armijo * step * slope;
        let mut trial = z.clone();
        axpy(&mut trial, 1.0, &direction);
        // The unit step is usually accepted, so evaluate everything there.
        let (v, g, h) = objective.evaluate(&trial);
        let next = if accept(v, 1.0) {
            (trial, v, g, h)
        } else {
            let mut step = 1.0;
            let mut halvings = 0;
            loop {
                halvings += 1;
                if halvings > config.max_halvings {
                    return Err(FilterError::LineSearchFailed { halvings });
                }
                step *= config.backtrack;
                let mut trial = z.clone();
                axpy(&mut trial, step, &direction);
                if accept(objective.value(&trial), step) {
                    let (v, g, h) = objective.evaluate(&trial);
                    break (trial, v, g, h);
                }
            }
        };
        if !next.1.is_finite() || next.2.iter().any(|x| !x.is_finite()) {
            return Err(FilterError::NonFinite {
                iterations: iteration + 1,
            });
        }
        (z, value, grad, hessian) = next;
        grad_norm = sup_norm(&grad);
        if window.len() == config.memory {
            window.pop_front();
        }
        window.push_back(value);
    }
    unreachable!("loop exits through return")
}
