use ndarray::Array2;
use rand::seq::index::sample;

use super::{check_k, Partition};
use crate::error::Result;
use crate::seeds::restart_rng;

const MAX_LLOYD_ITERATIONS: usize = 300;

/// Best Lloyd run over the restarts.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub partition: Partition,
    /// `k x n` cluster means.
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
    /// Restart that produced the result.
    pub restart: usize,
    /// Objective after each assignment step of the winning run.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub(crate) struct LloydRun {
    pub assignment: Vec<usize>,
    pub centroids: Vec<f64>,
    pub objective: f64,
    /// Objective after each assignment step.
    pub history: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &[f64], n: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks_exact(n).enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn update_means(x: &[f64], n: usize, assignment: &[usize], k: usize, centroids: &mut [f64]) {
    let mut counts = vec![0usize; k];
    centroids.iter_mut().for_each(|v| *v = 0.0);
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for h in 0..n {
            centroids[c * n + h] += x[i * n + h];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for h in 0..n {
                centroids[c * n + h] /= counts[c] as f64;
            }
        }
    }
}

/// Lloyd's iterations from the given seed centroids.
pub(crate) fn lloyd(x: &[f64], m: usize, n: usize, k: usize, mut centroids: Vec<f64>) -> LloydRun {
    let mut assignment = vec![usize::MAX; m];
    let mut dist = vec![0.0; m];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for i in 0..m {
            let (c, d) = nearest(&x[i * n..(i + 1) * n], &centroids, n);
            if c != assignment[i] {
                changed = true;
                assignment[i] = c;
            }
            dist[i] = d;
        }
        // Empty clusters take the point farthest from its centroid.
        loop {
            let mut counts = vec![0usize; k];
            for &c in &assignment {
                counts[c] += 1;
            }
            let Some(empty) = counts.iter().position(|&s| s == 0) else {
                break;
            };
            let far = (0..m)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= m leaves a donor cluster");
            assignment[far] = empty;
            dist[far] = 0.0;
            centroids[empty * n..(empty + 1) * n].copy_from_slice(&x[far * n..(far + 1) * n]);
            changed = true;
        }
        history.push(dist.iter().sum());
        if !changed {
            break;
        }
        update_means(x, n, &assignment, k, &mut centroids);
    }
    let objective = (0..m)
        .map(|i| {
            let c = assignment[i];
            sq_dist(&x[i * n..(i + 1) * n], &centroids[c * n..(c + 1) * n])
        })
        .sum();
    LloydRun {
        assignment,
        centroids,
        objective,
        history,
    }
}

/// Lloyd's k-means, best of `restarts` runs seeded by distinct random samples.
pub fn kmeans(points: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let (m, n) = points.dim();
    check_k(k, m)?;
    let x = points.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let mut best: Option<(LloydRun, usize)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = restart_rng(seed, r);
        let seeds = sample(&mut rng, m, k);
        let mut centroids = Vec::with_capacity(k * n);
        for i in seeds.iter() {
            centroids.extend_from_slice(&x[i * n..(i + 1) * n]);
        }
        let run = lloyd(x, m, n, k, centroids);
        if best.as_ref().is_none_or(|b| run.objective < b.0.objective) {
            best = Some((run, r));
        }
    }
    let (run, restart) = best.expect("at least one restart");
    Ok(KMeansResult {
        partition: Partition::new(run.assignment, k)?,
        centroids: Array2::from_shape_vec((k, n), run.centroids).expect("shape"),
        objective: run.objective,
        restart,
        history: run.history,
    })
}
