//! Penalty-selection criterion and the adjusted Rand index.

use std::cmp::Ordering;

use ndarray::Array2;

use crate::clustering::{KernelSpec, Partition};
use crate::error::{FilterError, Result};

/// Score of a partition; lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionValue {
    /// `+inf` when the between-cluster sum vanishes.
    pub value: f64,
    /// Sum of kernel distances over pairs inside each cluster.
    pub within: Vec<f64>,
    /// Number of pairs inside each cluster.
    pub pairs: Vec<usize>,
    /// Sum of kernel distances over pairs in different clusters.
    pub between: f64,
}

impl CriterionValue {
    pub fn is_sentinel(&self) -> bool {
        self.value == f64::INFINITY
    }

    /// Orders by value; the sentinel ranks after every finite value.
    pub fn compare(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value)
    }
}

/// Kernel distances between all sample pairs, packed row-wise over `i < j`.
#[derive(Debug, Clone)]
pub struct KernelDistanceTable {
    m: usize,
    values: Vec<f64>,
    total: f64,
}

impl KernelDistanceTable {
    pub fn new(points: &Array2<f64>, kernel: &KernelSpec) -> Self {
        let m = points.nrows();
        let mut values = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            let xi = points.row(i);
            for j in (i + 1)..m {
                values.push(crate::clustering::kernel_distance(
                    xi,
                    points.row(j),
                    kernel,
                ));
            }
        }
        let total = values.iter().sum();
        Self { m, values, total }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Scores a partition of the samples the table was built from.
    pub fn criterion(&self, partition: &Partition) -> Result<CriterionValue> {
        if partition.len() != self.m {
            return Err(FilterError::ShapeMismatch {
                expected: (self.m, 1),
                actual: (partition.len(), 1),
            });
        }
        let k = partition.num_clusters();
        if k < 2 {
            return Err(FilterError::InvalidArgument(format!(
                "criterion needs at least 2 clusters, got {k}"
            )));
        }
        let a = partition.assignment();
        let mut within = vec![0.0; k];
        let mut idx = 0;
        for i in 0..self.m {
            let ci = a[i];
            for j in (i + 1)..self.m {
                if a[j] == ci {
                    within[ci] += self.values[idx];
                }
                idx += 1;
            }
        }
        let pairs: Vec<usize> = partition
            .sizes()
            .iter()
            .map(|&s| s * s.saturating_sub(1) / 2)
            .collect();
        // Summing the cross terms directly keeps `between` exactly zero when
        // every cross pair coincides.
        let mut between = 0.0;
        let mut idx = 0;
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                if a[j] != a[i] {
                    between += self.values[idx];
                }
                idx += 1;
            }
        }
        debug_assert!(
            (between + within.iter().sum::<f64>() - self.total).abs() <= 1e-9 * self.total.max(1.0)
        );
        let value = if between > 0.0 {
            within
                .iter()
                .zip(&pairs)
                .filter(|(_, &p)| p > 0)
                .map(|(&d, &p)| d / p as f64)
                .sum::<f64>()
                / between
        } else {
            f64::INFINITY
        };
        Ok(CriterionValue {
            value,
            within,
            pairs,
            between,
        })
    }
}

/// Average within-cluster kernel distance per pair, summed over clusters and
/// divided by the total between-cluster kernel distance.
///
/// Singleton clusters contribute nothing. A partition whose between-cluster
/// sum is zero gets the value `+inf`.
pub fn criterion_c(
    partition: &Partition,
    points: &Array2<f64>,
    kernel: &KernelSpec,
) -> Result<CriterionValue> {
    if partition.len() != points.nrows() {
        return Err(FilterError::ShapeMismatch {
            expected: (points.nrows(), 1),
            actual: (partition.len(), 1),
        });
    }
    KernelDistanceTable::new(points, kernel).criterion(partition)
}

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index.
///
/// When both partitions are trivial in the same way (the adjustment's
/// denominator vanishes) the result is 1.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    if p.len() != q.len() {
        return Err(FilterError::ShapeMismatch {
            expected: (p.len(), 1),
            actual: (q.len(), 1),
        });
    }
    let (kp, kq) = (p.num_clusters(), q.num_clusters());
    let mut table = vec![0usize; kp * kq];
    for (&a, &b) in p.assignment().iter().zip(q.assignment()) {
        table[a * kq + b] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let rows: f64 = p.sizes().into_iter().map(choose2).sum();
    let cols: f64 = q.sizes().into_iter().map(choose2).sum();
    let total = choose2(p.len());
    let expected = if total > 0.0 {
        rows * cols / total
    } else {
        0.0
    };
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn part(a: &[usize]) -> Partition {
        Partition::from_labels(a)
    }

    #[test]
    fn coincident_clusters_score_zero() {
        let x = array![[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]];
        let c = criterion_c(&part(&[0, 0, 1, 1]), &x, &KernelSpec::default()).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn hand_example() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let c = criterion_c(&part(&[0, 0, 1, 1]), &x, &KernelSpec::default()).unwrap();
        let dw = 2.0 * (1.0 - (-0.1f64).exp());
        let db = 2.0 * 2.0 * (1.0 - (-10.0f64).exp()) + 2.0 * 2.0 * (1.0 - (-10.1f64).exp());
        assert!((c.within[0] - dw).abs() < 1e-15);
        assert_eq!(c.pairs, vec![1, 1]);
        assert!((c.between - db).abs() < 1e-12);
        assert!((c.value - 2.0 * dw / db).abs() < 1e-15);
        assert!((c.value - 0.047581).abs() < 1e-3);
    }

    #[test]
    fn far_singleton_lowers_the_score() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let y = array![
            [0.0, 0.0],
            [0.0, 1.0],
            [10.0, 0.0],
            [10.0, 1.0],
            [50.0, 50.0]
        ];
        let a = criterion_c(&part(&[0, 0, 1, 1]), &x, &KernelSpec::default()).unwrap();
        let b = criterion_c(&part(&[0, 0, 1, 1, 2]), &y, &KernelSpec::default()).unwrap();
        assert_eq!(a.within, b.within[..2]);
        assert!(b.between > a.between);
        assert!(b.value < a.value);
    }

    #[test]
    fn coincident_cross_pairs_give_sentinel() {
        let x = array![[1.0], [1.0], [1.0]];
        let c = criterion_c(&part(&[0, 1, 1]), &x, &KernelSpec::default()).unwrap();
        assert!(c.is_sentinel());
        let finite = criterion_c(
            &part(&[0, 1, 1]),
            &array![[0.0], [1.0], [2.0]],
            &KernelSpec::default(),
        )
        .unwrap();
        assert_eq!(finite.compare(&c), Ordering::Less);
    }

    #[test]
    fn one_cluster_is_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(criterion_c(&part(&[0, 0]), &x, &KernelSpec::default()).is_err());
    }

    #[test]
    fn ari_examples() {
        let p = part(&[0, 0, 0, 1, 1, 1]);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        let q = part(&[0, 0, 1, 1, 1, 1]);
        assert!((adjusted_rand_index(&p, &q).unwrap() - 1.2 / 3.7).abs() < 1e-12);
        let one = part(&[0; 6]);
        let singletons = part(&[0, 1, 2, 3, 4, 5]);
        assert_eq!(adjusted_rand_index(&one, &singletons).unwrap(), 0.0);
        assert!(adjusted_rand_index(&p, &part(&[0, 1])).is_err());
    }
}
