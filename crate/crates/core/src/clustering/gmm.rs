use ndarray::{Array1, Array2, Array3};
use rand::seq::index::sample;

use super::{check_k, Partition};
use crate::error::{FilterError, Result};
use crate::seeds::restart_rng;

/// Ridge added to a covariance that is not positive definite.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Stop when the log-likelihood changes by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

/// Full-covariance Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub weights: Array1<f64>,
    /// `k x n`.
    pub means: Array2<f64>,
    /// `k x n x n`.
    pub covariances: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct EmResult {
    pub partition: Partition,
    pub mixture: GaussianMixture,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub restart: usize,
    /// Log-likelihood after each E-step of the winning run.
    pub history: Vec<f64>,
}

/// Lower Cholesky factor of a row-major `n x n` matrix, or `None` if the
/// matrix is not numerically positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factors `cov`, adding [`COVARIANCE_FLOOR`] to the diagonal until it is
/// positive definite. The floored matrix is written back.
fn factor_with_floor(cov: &mut [f64], n: usize, floored: &mut bool) -> Vec<f64> {
    loop {
        if let Some(l) = cholesky(cov, n) {
            return l;
        }
        *floored = true;
        for h in 0..n {
            cov[h * n + h] += COVARIANCE_FLOOR;
        }
    }
}

/// Per-component Gaussian log-density evaluator.
struct Component {
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl Component {
    fn new(mean: Vec<f64>, chol: Vec<f64>, n: usize, log_weight: f64) -> Self {
        let log_det: f64 = (0..n).map(|h| chol[h * n + h].ln()).sum::<f64>() * 2.0;
        Self {
            mean,
            chol,
            log_norm: log_weight - 0.5 * (n as f64 * LN_2PI + log_det),
        }
    }

    fn log_density(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let n = self.mean.len();
        let mut q = 0.0;
        for i in 0..n {
            let mut s = x[i] - self.mean[i];
            for p in 0..i {
                s -= self.chol[i * n + p] * scratch[p];
            }
            let v = s / self.chol[i * n + i];
            scratch[i] = v;
            q += v * v;
        }
        self.log_norm - 0.5 * q
    }
}

fn weighted_covariance(
    x: &[f64],
    w: &[f64],
    resp: Option<(&[f64], usize, usize)>,
    mean: &[f64],
    mass: f64,
) -> Vec<f64> {
    let n = mean.len();
    let mut cov = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for (i, &wi) in w.iter().enumerate() {
        let r = match resp {
            Some((r, k, c)) => wi * r[i * k + c],
            None => wi,
        };
        if r == 0.0 {
            continue;
        }
        for h in 0..n {
            d[h] = x[i * n + h] - mean[h];
        }
        for a in 0..n {
            for b in 0..=a {
                cov[a * n + b] += r * d[a] * d[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..=a {
            let v = cov[a * n + b] / mass;
            cov[a * n + b] = v;
            cov[b * n + a] = v;
        }
    }
    cov
}

pub(crate) struct EmRun {
    pub assignment: Vec<usize>,
    pub mixture: GaussianMixture,
    pub log_likelihood: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Some covariance lost positive definiteness and was floored.
    pub degenerate: bool,
}

/// EM on rows of `x` with multiplicities `w`, starting from the given means.
pub(crate) fn em_run(
    x: &[f64],
    w: &[f64],
    n: usize,
    k: usize,
    init_means: Vec<f64>,
    config: &EmConfig,
) -> EmRun {
    let m = w.len();
    let total: f64 = w.iter().sum();
    let mut global_mean = vec![0.0; n];
    for i in 0..m {
        for h in 0..n {
            global_mean[h] += w[i] * x[i * n + h] / total;
        }
    }
    let global = weighted_covariance(x, w, None, &global_mean, total);

    let mut means = init_means;
    let mut covs: Vec<Vec<f64>> = vec![global; k];
    let mut mix = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; m * k];
    let mut scratch = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut previous = f64::NEG_INFINITY;
    let mut degenerate = false;

    loop {
        let components: Vec<Component> = (0..k)
            .map(|c| {
                let chol = factor_with_floor(&mut covs[c], n, &mut degenerate);
                Component::new(means[c * n..(c + 1) * n].to_vec(), chol, n, mix[c].ln())
            })
            .collect();
        // E-step with log-sum-exp.
        let mut ll = 0.0;
        for i in 0..m {
            let xi = &x[i * n..(i + 1) * n];
            let row = &mut resp[i * k..(i + 1) * k];
            let mut top = f64::NEG_INFINITY;
            for (c, comp) in components.iter().enumerate() {
                row[c] = comp.log_density(xi, &mut scratch);
                top = top.max(row[c]);
            }
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - top).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
            ll += w[i] * (top + s.ln());
        }
        history.push(ll);
        let done = (ll - previous).abs() < config.tolerance || iterations >= config.max_iterations;
        previous = ll;
        if done {
            break;
        }
        iterations += 1;
        // M-step.
        for c in 0..k {
            let mass: f64 = (0..m).map(|i| w[i] * resp[i * k + c]).sum();
            if mass <= 0.0 {
                mix[c] = 0.0;
                continue;
            }
            mix[c] = mass / total;
            let mean = &mut means[c * n..(c + 1) * n];
            mean.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let r = w[i] * resp[i * k + c];
                for h in 0..n {
                    mean[h] += r * x[i * n + h];
                }
            }
            mean.iter_mut().for_each(|v| *v /= mass);
            covs[c] =
                weighted_covariance(x, w, Some((&resp, k, c)), &means[c * n..(c + 1) * n], mass);
        }
    }

    // A full covariance needs more than n points of support.
    degenerate |= mix.iter().any(|&p| p * total < (n + 1) as f64);
    let mut assignment: Vec<usize> = (0..m)
        .map(|i| {
            let row = &resp[i * k..(i + 1) * k];
            (0..k).fold(0, |b, c| if row[c] > row[b] { c } else { b })
        })
        .collect();
    // Empty components take the row with the highest responsibility for them
    // among components with more than one row.
    loop {
        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&s| s == 0) else {
            break;
        };
        let donor = (0..m)
            .filter(|&i| counts[assignment[i]] > 1)
            .max_by(|&a, &b| {
                resp[a * k + empty]
                    .total_cmp(&resp[b * k + empty])
                    .then(b.cmp(&a))
            })
            .expect("k <= m leaves a donor component");
        assignment[donor] = empty;
    }

    let mut cov3 = Array3::zeros((k, n, n));
    for c in 0..k {
        for a in 0..n {
            for b in 0..n {
                cov3[[c, a, b]] = covs[c][a * n + b];
            }
        }
    }
    EmRun {
        assignment,
        mixture: GaussianMixture {
            weights: Array1::from(mix),
            means: Array2::from_shape_vec((k, n), means).expect("shape"),
            covariances: cov3,
        },
        log_likelihood: previous,
        history,
        iterations,
        degenerate,
    }
}

/// EM over weighted rows, best of `restarts` by final log-likelihood.
pub(crate) fn em_weighted(
    x: &[f64],
    w: &[f64],
    n: usize,
    k: usize,
    restarts: usize,
    seed: u64,
    config: &EmConfig,
) -> Result<(EmRun, usize)> {
    let m = w.len();
    check_k(k, m)?;
    if k > 1 && (1..m).all(|i| x[i * n..(i + 1) * n] == x[..n]) {
        return Err(FilterError::Degenerate(
            "all points identical; cannot fit more than one component".into(),
        ));
    }
    let mut best: Option<(EmRun, usize)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = restart_rng(seed, r);
        let mut means = Vec::with_capacity(k * n);
        for i in sample(&mut rng, m, k).iter() {
            means.extend_from_slice(&x[i * n..(i + 1) * n]);
        }
        let run = em_run(x, w, n, k, means, config);
        if !run.log_likelihood.is_finite() {
            continue;
        }
        // Floored runs sit on a likelihood singularity; any regular run beats them.
        let better = |b: &(EmRun, usize)| match (run.degenerate, b.0.degenerate) {
            (false, true) => true,
            (true, false) => false,
            _ => run.log_likelihood > b.0.log_likelihood,
        };
        if best.as_ref().is_none_or(better) {
            best = Some((run, r));
        }
    }
    best.ok_or(FilterError::NonFinite {
        iterations: config.max_iterations,
    })
}

/// Full-covariance EM for a Gaussian mixture with hard assignment by maximum
/// responsibility. Initial means are `k` random samples, initial covariances
/// the global covariance and initial weights uniform.
pub fn em_gaussian_mixture(
    points: &Array2<f64>,
    k: usize,
    restarts: usize,
    seed: u64,
    config: &EmConfig,
) -> Result<EmResult> {
    let (m, n) = points.dim();
    let x = points.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let w = vec![1.0; m];
    let (run, restart) = em_weighted(x, &w, n, k, restarts, seed, config)?;
    Ok(EmResult {
        partition: Partition::new(run.assignment, k)?,
        mixture: run.mixture,
        log_likelihood: run.log_likelihood,
        iterations: run.iterations,
        restart,
        history: run.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticCase, SyntheticSpec};
    use ndarray::array;

    #[test]
    fn cholesky_of_known_matrix() {
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn single_component_is_the_mle() {
        let x = array![[0.0, 1.0], [2.0, 0.5], [1.0, -1.0], [3.0, 2.0], [-1.0, 0.0]];
        let r = em_gaussian_mixture(&x, 1, 1, 0, &EmConfig::default()).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let centered = &x - &mean;
        let cov = centered.t().dot(&centered) / 5.0;
        for h in 0..2 {
            assert!((r.mixture.means[[0, h]] - mean[h]).abs() < 1e-12);
            for g in 0..2 {
                assert!((r.mixture.covariances[[0, h, g]] - cov[[h, g]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_likelihood_ascends() {
        let d = generate_synthetic(SyntheticSpec::new(SyntheticCase::IV, 5));
        let x = d.points().as_slice().unwrap();
        let w = vec![1.0; d.len()];
        for r in 0..4 {
            let mut rng = restart_rng(2, r);
            let mut means = Vec::new();
            for i in sample(&mut rng, d.len(), 4).iter() {
                means.extend_from_slice(&x[i * 3..i * 3 + 3]);
            }
            let run = em_run(x, &w, 3, 4, means, &EmConfig::default());
            for pair in run.history.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-10, "{:?}", run.history);
            }
        }
    }

    #[test]
    fn rejects_identical_points() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            em_gaussian_mixture(&x, 2, 1, 0, &EmConfig::default()),
            Err(FilterError::Degenerate(_))
        ));
        assert!(em_gaussian_mixture(&x, 1, 1, 0, &EmConfig::default()).is_ok());
    }

    #[test]
    fn multiplicities_match_duplicated_rows() {
        let x = [0.0, 0.0, 0.2, 0.1, 3.0, 3.0, 3.1, 2.9, 0.1, 0.3];
        let w = [2.0, 1.0, 3.0, 1.0, 2.0];
        let mut dup = Vec::new();
        for (i, &c) in w.iter().enumerate() {
            for _ in 0..c as usize {
                dup.extend_from_slice(&x[i * 2..i * 2 + 2]);
            }
        }
        let init = vec![0.0, 0.0, 3.0, 3.0];
        let a = em_run(&x, &w, 2, 2, init.clone(), &EmConfig::default());
        let b = em_run(&dup, &vec![1.0; 9], 2, 2, init, &EmConfig::default());
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-8);
    }

    #[test]
    fn collapsed_components_are_flagged() {
        // Two coincident far points would give a singular component.
        let x = [
            0.0, 0.0, 1.0, 0.2, 0.3, 1.1, -0.4, 0.7, 0.9, -0.8, 0.1, 0.5, 9.0, 9.0, 9.0, 9.0,
        ];
        let w = vec![1.0; 8];
        let init = vec![0.0, 0.0, 9.0, 9.0];
        let run = em_run(&x, &w, 2, 2, init, &EmConfig::default());
        assert!(run.degenerate);
        let (best, _) = em_weighted(&x, &w, 2, 2, 20, 3, &EmConfig::default()).unwrap();
        assert!(!best.degenerate);
    }
}
