//! Sharpness continuation for the smooth l0 surrogate.

use std::time::Instant;

use ndarray::{Array2, Axis};

use super::newton::{truncated_newton_minimize, NewtonConfig};
use super::SolverConfig;
use crate::error::{FilterError, Result};
use crate::model::{CentroidState, PairWeights, PenalizedProblem};

/// One sharpness stage of a continuation run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// Stage index, starting at 1.
    pub t: usize,
    pub alpha: f64,
    /// Gradient tolerance used for this stage.
    pub epsilon: f64,
    pub iterations: usize,
    pub hessian_products: usize,
    /// Gradient sup-norm at the stage's solution.
    pub grad_norm: f64,
    /// Surrogate value at the warm start, before minimizing.
    pub start_objective: f64,
    /// Surrogate value at the stage's solution.
    pub objective: f64,
    pub seconds: f64,
    pub truncated: bool,
}

/// Timing and convergence record for one solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    pub lambda: f64,
    pub stages: Vec<StageRecord>,
    pub total_seconds: f64,
}

impl SolveTrace {
    pub fn final_stage(&self) -> Option<&StageRecord> {
        self.stages.last()
    }
}

/// Sharpness schedule: `alpha_{t+1} = min(alpha_max, (1 + exp(-rate t)) alpha_t)`,
/// from `alpha_init` until `alpha_max` is reached.
pub fn alpha_schedule(config: &SolverConfig) -> Vec<f64> {
    let mut alphas = vec![config.alpha_init.min(config.alpha_max)];
    let mut t = 1.0;
    while *alphas.last().expect("nonempty") < config.alpha_max {
        let a = *alphas.last().expect("nonempty");
        alphas.push(
            config
                .alpha_max
                .min((1.0 + (-config.alpha_growth_rate * t).exp()) * a),
        );
        t += 1.0;
    }
    alphas
}

/// Stage tolerance `max(floor, scale / alpha)`.
pub fn stage_tolerance(config: &SolverConfig, alpha: f64) -> f64 {
    config.tolerance_floor.max(config.tolerance_scale / alpha)
}

/// Minimizes the smooth surrogate along the sharpness schedule, warm-starting
/// each stage from the previous stage's solution. `z0` defaults to the samples.
pub fn solve_smooth_l0(
    points: &Array2<f64>,
    weights: &PairWeights,
    lambda: f64,
    config: &SolverConfig,
    z0: Option<&Array2<f64>>,
) -> Result<(CentroidState, SolveTrace)> {
    config.validate()?;
    let base = PenalizedProblem::from_points(points, weights, lambda)?;
    let z = match z0 {
        Some(z0) => {
            if z0.dim() != points.dim() {
                return Err(FilterError::ShapeMismatch {
                    expected: points.dim(),
                    actual: z0.dim(),
                });
            }
            z0.clone()
        }
        None => points.clone(),
    };
    let started = Instant::now();
    let mut stages = Vec::new();
    let mut newton: NewtonConfig = config.newton.clone();
    let (m, n) = points.dim();
    newton.cg_max_iterations.get_or_insert(10 * m * n);
    let duplicates = Duplicates::find(points, &z, weights);
    let reduced = duplicates.as_ref().map(|d| d.reduce(points, &z, weights));
    let (base, mut z) = match &reduced {
        Some((x, z, w)) => (PenalizedProblem::from_points(x, w, lambda)?, z.clone()),
        None => (base, z),
    };
    for (index, alpha) in alpha_schedule(config).into_iter().enumerate() {
        let mut problem = base.with_alpha(alpha)?;
        if let Some(d) = &duplicates {
            problem = problem.with_multiplicity(&d.counts)?;
        }
        let epsilon = stage_tolerance(config, alpha);
        let stage_start = Instant::now();
        let outcome = truncated_newton_minimize(&problem, z, epsilon, &newton).map_err(|e| {
            FilterError::Continuation {
                alpha,
                source: Box::new(e),
            }
        })?;
        z = outcome.z;
        stages.push(StageRecord {
            t: index + 1,
            alpha,
            epsilon,
            iterations: outcome.iterations,
            hessian_products: outcome.hessian_products,
            grad_norm: outcome.grad_norm,
            start_objective: outcome.initial_value,
            objective: outcome.value,
            seconds: stage_start.elapsed().as_secs_f64(),
            truncated: outcome.truncated,
        });
    }
    if let Some(d) = &duplicates {
        z = d.expand(&z);
    }
    let trace = SolveTrace {
        lambda,
        stages,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((CentroidState::new(z), trace))
}

/// Groups of samples that agree in the data, in the starting point and in
/// their weights to every other sample. Such samples follow identical
/// iterates, so each group is solved once with its size as a multiplicity.
struct Duplicates {
    /// First sample of each group.
    representatives: Vec<usize>,
    group: Vec<usize>,
    counts: Vec<f64>,
}

impl Duplicates {
    fn find(points: &Array2<f64>, z0: &Array2<f64>, weights: &PairWeights) -> Option<Self> {
        let m = points.nrows();
        let key = |i: usize| -> Vec<u64> {
            points
                .row(i)
                .iter()
                .chain(z0.row(i).iter())
                .map(|v| (v + 0.0).to_bits())
                .collect()
        };
        let mut seen = std::collections::HashMap::new();
        let mut representatives = Vec::new();
        let mut group = Vec::with_capacity(m);
        for i in 0..m {
            let next = representatives.len();
            let g = *seen.entry(key(i)).or_insert(next);
            if g == next {
                representatives.push(i);
            }
            group.push(g);
        }
        if representatives.len() == m {
            return None;
        }
        for i in 0..m {
            let r = representatives[group[i]];
            if r != i
                && (0..m).any(|j| group[j] != group[i] && weights.get(i, j) != weights.get(r, j))
            {
                return None;
            }
        }
        let mut counts = vec![0.0; representatives.len()];
        for &g in &group {
            counts[g] += 1.0;
        }
        Some(Self {
            representatives,
            group,
            counts,
        })
    }

    fn reduce(
        &self,
        points: &Array2<f64>,
        z0: &Array2<f64>,
        weights: &PairWeights,
    ) -> (Array2<f64>, Array2<f64>, PairWeights) {
        let r = &self.representatives;
        let x = points.select(Axis(0), r);
        let z = z0.select(Axis(0), r);
        let mut packed = Vec::with_capacity(r.len() * r.len().saturating_sub(1) / 2);
        for (a, &i) in r.iter().enumerate() {
            packed.extend(r[a + 1..].iter().map(|&j| weights.get(i, j)));
        }
        let w = PairWeights::from_packed(r.len(), packed).expect("subset of valid weights");
        (x, z, w)
    }

    fn expand(&self, z: &Array2<f64>) -> Array2<f64> {
        z.select(Axis(0), &self.group)
    }
}
