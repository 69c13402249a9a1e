use ndarray::Array2;
use rand::Rng;

use super::kernel::{gaussian_gram, KernelSpec};
use super::{check_k, Partition};
use crate::error::{FilterError, Result};
use crate::seeds::restart_rng;

const MAX_ITERATIONS: usize = 100;

/// Best kernel k-means run over the restarts.
#[derive(Debug, Clone)]
pub struct KernelKMeansResult {
    pub partition: Partition,
    /// Within-cluster scatter in feature space.
    pub objective: f64,
    pub restart: usize,
    /// Objective after each assignment step of the winning run.
    pub history: Vec<f64>,
}

/// Per-cluster kernel sums, updated incrementally as rows move.
struct Sums<'a> {
    gram: &'a [f64],
    w: &'a [f64],
    m: usize,
    k: usize,
    /// `row_sum[i * k + c] = sum_{j in c} w_j K(i, j)`.
    row_sum: Vec<f64>,
    mass: Vec<f64>,
    count: Vec<usize>,
}

impl<'a> Sums<'a> {
    fn new(gram: &'a [f64], w: &'a [f64], k: usize, assignment: &[usize]) -> Self {
        let m = w.len();
        let mut row_sum = vec![0.0; m * k];
        let mut mass = vec![0.0; k];
        let mut count = vec![0; k];
        for (j, &c) in assignment.iter().enumerate() {
            mass[c] += w[j];
            count[c] += 1;
        }
        for i in 0..m {
            let row = &gram[i * m..(i + 1) * m];
            let out = &mut row_sum[i * k..(i + 1) * k];
            for (j, &c) in assignment.iter().enumerate() {
                out[c] += w[j] * row[j];
            }
        }
        Self {
            gram,
            w,
            m,
            k,
            row_sum,
            mass,
            count,
        }
    }

    fn moved(&mut self, j: usize, from: usize, to: usize) {
        let col = &self.gram[j * self.m..(j + 1) * self.m];
        let wj = self.w[j];
        for i in 0..self.m {
            self.row_sum[i * self.k + from] -= wj * col[i];
            self.row_sum[i * self.k + to] += wj * col[i];
        }
        self.mass[from] -= wj;
        self.mass[to] += wj;
        self.count[from] -= 1;
        self.count[to] += 1;
    }

    /// `sum_{i,j in c} w_i w_j K(i, j)` for every cluster.
    fn within(&self, assignment: &[usize]) -> Vec<f64> {
        let mut t = vec![0.0; self.k];
        for (i, &c) in assignment.iter().enumerate() {
            t[c] += self.w[i] * self.row_sum[i * self.k + c];
        }
        t
    }

    /// Squared feature-space distance of row `i` to every cluster mean.
    fn distances(&self, i: usize, within: &[f64], out: &mut [f64]) {
        let kii = self.gram[i * self.m + i];
        for c in 0..self.k {
            let s = self.mass[c];
            out[c] = if self.count[c] == 0 {
                f64::INFINITY
            } else {
                kii - 2.0 * self.row_sum[i * self.k + c] / s + within[c] / (s * s)
            };
        }
    }
}

fn scatter(gram: &[f64], w: &[f64], k: usize, assignment: &[usize]) -> f64 {
    let m = w.len();
    let sums = Sums::new(gram, w, k, assignment);
    let within = sums.within(assignment);
    let diag: f64 = (0..m).map(|i| w[i] * gram[i * m + i]).sum();
    diag - (0..k)
        .filter(|&c| sums.count[c] > 0)
        .map(|c| within[c] / sums.mass[c])
        .sum::<f64>()
}

pub(crate) struct KernelRun {
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub history: Vec<f64>,
}

/// Batch kernel k-means over rows with multiplicities `w`.
pub(crate) fn kernel_lloyd(
    gram: &[f64],
    w: &[f64],
    k: usize,
    mut assignment: Vec<usize>,
) -> KernelRun {
    let m = w.len();
    let mut sums = Sums::new(gram, w, k, &assignment);
    let mut dist = vec![0.0; k];
    let mut own = vec![0.0; m];
    let mut history = Vec::new();
    let mut next = assignment.clone();
    for _ in 0..MAX_ITERATIONS {
        let within = sums.within(&assignment);
        let mut objective = 0.0;
        for i in 0..m {
            sums.distances(i, &within, &mut dist);
            let current = assignment[i];
            let mut best = current;
            let mut best_d = dist[current];
            for (c, &d) in dist.iter().enumerate() {
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            next[i] = best;
            own[i] = best_d;
            objective += w[i] * best_d;
        }
        history.push(objective);
        let mut changed = false;
        for i in 0..m {
            if next[i] != assignment[i] {
                sums.moved(i, assignment[i], next[i]);
                assignment[i] = next[i];
                changed = true;
            }
        }
        // Empty clusters take the row farthest from its cluster.
        while let Some(empty) = sums.count.iter().position(|&s| s == 0) {
            let far = (0..m)
                .filter(|&i| sums.count[assignment[i]] > 1)
                .max_by(|&a, &b| own[a].total_cmp(&own[b]).then(b.cmp(&a)))
                .expect("k <= m leaves a donor cluster");
            sums.moved(far, assignment[far], empty);
            assignment[far] = empty;
            own[far] = 0.0;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let objective = scatter(gram, w, k, &assignment);
    KernelRun {
        assignment,
        objective,
        history,
    }
}

fn random_assignment<R: Rng>(rng: &mut R, m: usize, k: usize) -> Vec<usize> {
    (0..m).map(|_| rng.random_range(0..k)).collect()
}

/// Best of `restarts` runs from uniform random assignments.
pub(crate) fn kernel_kmeans_weighted(
    gram: &[f64],
    w: &[f64],
    k: usize,
    restarts: usize,
    seed: u64,
) -> (KernelRun, usize) {
    let mut best: Option<(KernelRun, usize)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = restart_rng(seed, r);
        let init = random_assignment(&mut rng, w.len(), k);
        let run = kernel_lloyd(gram, w, k, init);
        if best.as_ref().is_none_or(|b| run.objective < b.0.objective) {
            best = Some((run, r));
        }
    }
    best.expect("at least one restart")
}

/// Kernel k-means on a precomputed symmetric Gram matrix.
pub fn kernel_kmeans_gram(
    gram: &Array2<f64>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KernelKMeansResult> {
    let m = gram.nrows();
    if gram.ncols() != m {
        return Err(FilterError::InvalidArgument(
            "Gram matrix must be square".into(),
        ));
    }
    check_k(k, m)?;
    let g = gram.as_standard_layout();
    let g = g.as_slice().expect("standard layout");
    let (run, restart) = kernel_kmeans_weighted(g, &vec![1.0; m], k, restarts, seed);
    Ok(KernelKMeansResult {
        partition: Partition::new(run.assignment, k)?,
        objective: run.objective,
        restart,
        history: run.history,
    })
}

/// Kernel k-means with the Gaussian kernel, best of `restarts` random
/// initial assignments.
pub fn kernel_kmeans(
    points: &Array2<f64>,
    k: usize,
    kernel: &KernelSpec,
    restarts: usize,
    seed: u64,
) -> Result<KernelKMeansResult> {
    check_k(k, points.nrows())?;
    kernel_kmeans_gram(&gaussian_gram(points, kernel.gamma), k, restarts, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans::kmeans;
    use ndarray::array;

    #[test]
    fn one_cluster_total_scatter() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let spec = KernelSpec::default();
        let r = kernel_kmeans(&x, 1, &spec, 2, 0).unwrap();
        assert_eq!(r.partition.assignment(), &[0, 0, 0]);
        let gram = gaussian_gram(&x, 0.1);
        let expected = 3.0 - gram.sum() / 3.0;
        assert!((r.objective - expected).abs() < 1e-12);
    }

    #[test]
    fn duplicated_points_share_clusters() {
        let base = array![[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut x = Array2::zeros((8, 2));
        for i in 0..4 {
            x.row_mut(2 * i).assign(&base.row(i));
            x.row_mut(2 * i + 1).assign(&base.row(i));
        }
        let r = kernel_kmeans(&x, 4, &KernelSpec::default(), 64, 3).unwrap();
        assert!(r.objective.abs() < 1e-12);
        for i in 0..4 {
            let a = r.partition.assignment();
            assert_eq!(a[2 * i], a[2 * i + 1]);
        }
    }

    #[test]
    fn objective_never_increases() {
        let x = crate::data::generate_synthetic(crate::data::SyntheticSpec::new(
            crate::data::SyntheticCase::I,
            8,
        ));
        let gram = gaussian_gram(x.points(), 0.1);
        let g = gram.as_slice().unwrap();
        for r in 0..5 {
            let mut rng = restart_rng(1, r);
            let init = random_assignment(&mut rng, x.len(), 3);
            let run = kernel_lloyd(g, &vec![1.0; x.len()], 3, init);
            for w in run.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", run.history);
            }
        }
    }

    #[test]
    fn linear_kernel_reproduces_kmeans() {
        for seed in 0..10u64 {
            let mut rng = restart_rng(seed, 999);
            let x = Array2::from_shape_fn((7, 2), |_| rng.random_range(-1.0..1.0));
            let linear = x.dot(&x.t());
            let kk = kernel_kmeans_gram(&linear, 2, 64, seed).unwrap();
            let km = kmeans(&x, 2, 64, seed).unwrap();
            assert!((kk.objective - km.objective).abs() < 1e-9);
            assert_eq!(kk.partition.canonical(), km.partition.canonical());
        }
    }

    #[test]
    fn rejects_bad_k() {
        let x = array![[0.0], [1.0]];
        assert!(kernel_kmeans(&x, 3, &KernelSpec::default(), 1, 0).is_err());
    }
}
