//! Minimization of the smooth and ridge filters, coincidence detection and
//! the penalty grid.

mod continuation;
mod grid;
mod merge;
mod newton;
mod ridge;

pub use continuation::{alpha_schedule, solve_smooth_l0, stage_tolerance, SolveTrace, StageRecord};
pub use grid::{
    build_lambda_grid, find_collapse_lambda, find_lambda_max, find_ridge_lambda_max,
    BISECTION_STEPS, GRID_DECADES, LAMBDA_CEILING,
};
pub use merge::{merge_centroids, merge_with_tolerance, MergeGroups};
pub use newton::{truncated_newton_minimize, NewtonConfig, NewtonOutcome};
pub use ridge::{solve_ridge, RIDGE_GRAD_TOL};

use crate::error::{FilterError, Result};

/// Settings for the continuation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha_init: f64,
    pub alpha_max: f64,
    /// Rate `r` in the growth factor `1 + exp(-r t)`.
    pub alpha_growth_rate: f64,
    /// Lower bound of the per-stage gradient tolerance.
    pub tolerance_floor: f64,
    /// Numerator of the per-stage gradient tolerance `scale / alpha`.
    pub tolerance_scale: f64,
    pub newton: NewtonConfig,
    /// Coincidence tolerance relative to the data diameter.
    pub merge_tol_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_init: 1.0,
            alpha_max: 1e3,
            alpha_growth_rate: 0.07,
            tolerance_floor: 1e-5,
            tolerance_scale: 1e-2,
            newton: NewtonConfig::default(),
            merge_tol_rel: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.alpha_init,
            self.alpha_max,
            self.alpha_growth_rate,
            self.tolerance_floor,
            self.tolerance_scale,
            self.merge_tol_rel,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.alpha_init > self.alpha_max {
            return Err(FilterError::InvalidArgument(format!(
                "invalid solver settings: {self:?}"
            )));
        }
        self.newton.validate()
    }
}
