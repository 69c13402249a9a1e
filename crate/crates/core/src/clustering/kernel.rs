use ndarray::{Array2, ArrayView1};

use crate::error::{FilterError, Result};

/// Default Gaussian kernel width parameter.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Gaussian kernel `exp(-gamma |x - y|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub gamma: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FilterError::InvalidArgument(format!(
                "kernel gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }
}

fn sq_dist(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn gaussian_kernel(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    (-gamma * sq_dist(x, y)).exp()
}

/// Squared feature-space distance `K(x,x) - 2K(x,y) + K(y,y)`.
pub fn kernel_distance(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, kernel: &KernelSpec) -> f64 {
    // For the Gaussian kernel K(x,x) = 1, so this is 2(1 - K(x,y)).
    -2.0 * (-kernel.gamma * sq_dist(x, y)).exp_m1()
}

/// Gram matrix of the Gaussian kernel.
pub fn gaussian_gram(points: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let m = points.nrows();
    let mut gram = Array2::zeros((m, m));
    for i in 0..m {
        gram[[i, i]] = 1.0;
        for j in (i + 1)..m {
            let v = gaussian_kernel(points.row(i), points.row(j), gamma);
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }
    gram
}
