//! Baseline clustering algorithms and the Gaussian kernel.

mod gmm;
mod kernel;
mod kernel_kmeans;
mod kmeans;
mod linkage;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub use gmm::{em_gaussian_mixture, EmConfig, EmResult, GaussianMixture, COVARIANCE_FLOOR};
pub use kernel::{gaussian_gram, gaussian_kernel, kernel_distance, KernelSpec, DEFAULT_GAMMA};
pub use kernel_kmeans::{kernel_kmeans, kernel_kmeans_gram, KernelKMeansResult};
pub use kmeans::{kmeans, KMeansResult};
pub use linkage::single_linkage;

use crate::error::{FilterError, Result};

/// Assignment of `m` samples to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Requires every id in `0..k` to be used.
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        let mut used = vec![false; k];
        for &c in &assignment {
            if c >= k {
                return Err(FilterError::InvalidArgument(format!(
                    "cluster id {c} out of range for k = {k}"
                )));
            }
            used[c] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(FilterError::InvalidArgument(
                "partition has an empty cluster".into(),
            ));
        }
        Ok(Self { assignment, k })
    }

    /// Relabels arbitrary ids onto `0..k` by order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            k: map.len(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Same grouping with ids renumbered by first appearance.
    pub fn canonical(&self) -> Self {
        Self::from_labels(&self.assignment)
    }

    /// Composes with a map from representatives to clusters: sample `i`
    /// belongs to `outer[self[i]]`.
    pub fn compose(&self, outer: &Partition) -> Result<Self> {
        if outer.len() != self.k {
            return Err(FilterError::InvalidArgument(format!(
                "outer partition covers {} items, expected {}",
                outer.len(),
                self.k
            )));
        }
        let assignment = self
            .assignment
            .iter()
            .map(|&c| outer.assignment[c])
            .collect();
        Self::new(assignment, outer.k)
    }

    /// Writes `index,cluster` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |source: csv::Error| FilterError::Csv {
            path: "<output>".into(),
            source,
        };
        w.write_record(["index", "cluster"]).map_err(io)?;
        for (i, c) in self.assignment.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|source| FilterError::Io {
            path: "<output>".into(),
            source,
        })
    }
}

/// The three clustering algorithms compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SingleLinkage,
    GaussianMixture,
    KernelKMeans,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Self::SingleLinkage,
        Self::GaussianMixture,
        Self::KernelKMeans,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Self::SingleLinkage => "SL",
            Self::GaussianMixture => "EMGM",
            Self::KernelKMeans => "KKM",
        }
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, Self::SingleLinkage)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Algorithm {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sl" | "single-linkage" | "single_linkage" => Ok(Self::SingleLinkage),
            "emgm" | "em" | "gmm" => Ok(Self::GaussianMixture),
            "kkm" | "kernel-kmeans" | "kernel_kmeans" => Ok(Self::KernelKMeans),
            other => Err(FilterError::InvalidArgument(format!(
                "unknown clustering algorithm '{other}'"
            ))),
        }
    }
}

/// Hyperparameters shared by every application of an algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub restarts: usize,
    pub kernel: KernelSpec,
    pub em: EmConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            restarts: 100,
            kernel: KernelSpec::default(),
            em: EmConfig::default(),
        }
    }
}

/// Runs `algorithm` on `points` with `k` clusters.
pub fn run_algorithm(
    algorithm: Algorithm,
    points: &ndarray::Array2<f64>,
    k: usize,
    config: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    match algorithm {
        Algorithm::SingleLinkage => single_linkage(points, k),
        Algorithm::GaussianMixture => {
            em_gaussian_mixture(points, k, config.restarts, seed, &config.em).map(|r| r.partition)
        }
        Algorithm::KernelKMeans => {
            kernel_kmeans(points, k, &config.kernel, config.restarts, seed).map(|r| r.partition)
        }
    }
}

/// Runs `algorithm` on distinct rows carrying multiplicities, as if each row
/// were repeated `weights[i]` times. Duplicates always share a cluster.
pub fn run_algorithm_weighted(
    algorithm: Algorithm,
    points: &ndarray::Array2<f64>,
    weights: &[f64],
    k: usize,
    config: &ClusterConfig,
    seed: u64,
) -> Result<Partition> {
    let (m, n) = points.dim();
    if weights.len() != m || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(FilterError::InvalidArgument(
            "row weights must be positive, one per row".into(),
        ));
    }
    check_k(k, m)?;
    let x = points.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    match algorithm {
        Algorithm::SingleLinkage => single_linkage(points, k),
        Algorithm::GaussianMixture => {
            let (run, _) = gmm::em_weighted(x, weights, n, k, config.restarts, seed, &config.em)?;
            Partition::new(run.assignment, k)
        }
        Algorithm::KernelKMeans => {
            let gram = gaussian_gram(points, config.kernel.gamma);
            let g = gram.as_slice().expect("standard layout");
            let (run, _) =
                kernel_kmeans::kernel_kmeans_weighted(g, weights, k, config.restarts, seed);
            Partition::new(run.assignment, k)
        }
    }
}

pub(crate) fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        Err(FilterError::KOutOfRange { k, m })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_rejects_empty_cluster() {
        assert!(Partition::new(vec![0, 0, 2], 3).is_err());
        assert!(Partition::new(vec![0, 1, 3], 3).is_err());
        assert!(Partition::new(vec![0, 1, 2], 3).is_ok());
    }

    #[test]
    fn compose_maps_through_representatives() {
        let inner = Partition::new(vec![0, 1, 1, 2, 0], 3).unwrap();
        let outer = Partition::new(vec![1, 0, 1], 2).unwrap();
        let p = inner.compose(&outer).unwrap();
        assert_eq!(p.assignment(), &[1, 0, 0, 1, 1]);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.short_name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dbscan".parse::<Algorithm>().is_err());
    }
}
