//! Penalty grid construction.

use ndarray::Array2;

use super::continuation::solve_smooth_l0;
use super::merge::merge_centroids;
use super::ridge::{solve_ridge, RIDGE_GRAD_TOL};
use super::SolverConfig;
use crate::error::{FilterError, Result};
use crate::model::PairWeights;

/// Largest penalty tried before declaring that the centroids never collapse.
pub const LAMBDA_CEILING: f64 = 1e12;

/// Bisection steps refining the collapse threshold.
pub const BISECTION_STEPS: usize = 10;

/// Decades spanned by the geometric part of the grid.
pub const GRID_DECADES: f64 = 4.0;

/// Finds the smallest penalty at which `groups_at` reports a single group:
/// doubles from 1 until collapse, then bisects the last bracket.
pub fn find_collapse_lambda<F>(mut groups_at: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<usize>,
{
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        if groups_at(hi)? == 1 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CEILING {
            return Err(FilterError::NoCollapse(LAMBDA_CEILING));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if groups_at(mid)? == 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Collapse penalty for the smooth l0 filter.
pub fn find_lambda_max(
    points: &Array2<f64>,
    weights: &PairWeights,
    config: &SolverConfig,
) -> Result<f64> {
    check_samples(points)?;
    find_collapse_lambda(|lambda| {
        let (z, _) = solve_smooth_l0(points, weights, lambda, config, None)?;
        Ok(merge_centroids(z.as_array(), points, config.merge_tol_rel)?.num_groups())
    })
}

/// Collapse penalty for the ridge filter.
pub fn find_ridge_lambda_max(
    points: &Array2<f64>,
    weights: &PairWeights,
    config: &SolverConfig,
) -> Result<f64> {
    check_samples(points)?;
    find_collapse_lambda(|lambda| {
        let z = solve_ridge(points, weights, lambda, RIDGE_GRAD_TOL)?;
        Ok(merge_centroids(z.as_array(), points, config.merge_tol_rel)?.num_groups())
    })
}

fn check_samples(points: &Array2<f64>) -> Result<()> {
    if points.nrows() < 2 {
        return Err(FilterError::InvalidDataset(
            "penalty grid needs at least two samples".into(),
        ));
    }
    Ok(())
}

/// `size` penalties: 0, then a geometric sequence from
/// `lambda_max * 10^-4` to `lambda_max`.
pub fn build_lambda_grid(lambda_max: f64, size: usize) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(FilterError::InvalidArgument(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    match size {
        0 => Err(FilterError::InvalidArgument("empty grid".into())),
        1 => Ok(vec![0.0]),
        2 => Ok(vec![0.0, lambda_max]),
        _ => {
            let steps = (size - 2) as f64;
            let lo = lambda_max * 10f64.powf(-GRID_DECADES);
            let ratio = (lambda_max / lo).powf(1.0 / steps);
            let mut grid = Vec::with_capacity(size);
            grid.push(0.0);
            for t in 0..(size - 1) {
                grid.push(lo * ratio.powi(t as i32));
            }
            *grid.last_mut().expect("nonempty") = lambda_max;
            Ok(grid)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let grid = build_lambda_grid(3.5, 150).unwrap();
        assert_eq!(grid.len(), 150);
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 3.5);
        assert!((grid[1] - 3.5e-4).abs() < 1e-18);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        let r0 = grid[2] / grid[1];
        for w in grid[1..].windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_grid_sizes() {
        assert_eq!(build_lambda_grid(1.0, 1).unwrap(), vec![0.0]);
        assert_eq!(build_lambda_grid(1.0, 2).unwrap(), vec![0.0, 1.0]);
        assert!(build_lambda_grid(1.0, 0).is_err());
        assert!(build_lambda_grid(0.0, 5).is_err());
    }

    #[test]
    fn collapse_search_brackets_threshold() {
        let threshold = 37.3;
        let found = find_collapse_lambda(|l| Ok(if l >= threshold { 1 } else { 3 })).unwrap();
        assert!(found >= threshold);
        assert!(found - threshold <= 32.0 / 1024.0 + 1e-12);
    }

    #[test]
    fn collapse_search_below_one() {
        let found = find_collapse_lambda(|l| Ok(if l >= 0.1 { 1 } else { 2 })).unwrap();
        assert!((0.1..=0.1 + 1.0 / 1024.0).contains(&found));
    }

    #[test]
    fn collapse_search_gives_up() {
        assert!(matches!(
            find_collapse_lambda(|_| Ok(2)),
            Err(FilterError::NoCollapse(_))
        ));
    }
}
