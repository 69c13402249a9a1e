//! Coincidence detection among solved centroids.

use ndarray::Array2;

use crate::error::{FilterError, Result};

/// Connected components of the graph joining centroids closer than a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeGroups {
    /// Group id of every sample, numbered by first appearance.
    pub group_of: Vec<usize>,
    /// Mean centroid of each group.
    pub representatives: Array2<f64>,
    /// Absolute distance tolerance that was applied.
    pub tolerance: f64,
}

impl MergeGroups {
    pub fn num_groups(&self) -> usize {
        self.representatives.nrows()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups()];
        for &g in &self.group_of {
            sizes[g] += 1;
        }
        sizes
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups centroids whose pairwise distance is at most `tolerance`, closing
/// transitively.
pub fn merge_with_tolerance(z: &Array2<f64>, tolerance: f64) -> MergeGroups {
    let (m, n) = z.dim();
    let tol2 = tolerance * tolerance;
    let mut sets = DisjointSet::new(m);
    for i in 0..m {
        let zi = z.row(i);
        for j in (i + 1)..m {
            let d2: f64 = zi
                .iter()
                .zip(z.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= tol2 {
                sets.union(i, j);
            }
        }
    }
    let mut id_of_root = vec![usize::MAX; m];
    let mut group_of = Vec::with_capacity(m);
    let mut count = 0;
    for i in 0..m {
        let root = sets.find(i);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = count;
            count += 1;
        }
        group_of.push(id_of_root[root]);
    }
    let mut representatives = Array2::zeros((count, n));
    let mut sizes = vec![0.0; count];
    for (i, &g) in group_of.iter().enumerate() {
        let mut row = representatives.row_mut(g);
        row += &z.row(i);
        sizes[g] += 1.0;
    }
    for (g, mut row) in representatives.outer_iter_mut().enumerate() {
        row /= sizes[g];
    }
    MergeGroups {
        group_of,
        representatives,
        tolerance,
    }
}

/// Groups centroids within `tau_rel * diameter(X)` of each other.
pub fn merge_centroids(z: &Array2<f64>, points: &Array2<f64>, tau_rel: f64) -> Result<MergeGroups> {
    if !(tau_rel > 0.0) {
        return Err(FilterError::InvalidArgument(format!(
            "merge tolerance must be positive, got {tau_rel}"
        )));
    }
    if z.dim() != points.dim() {
        return Err(FilterError::ShapeMismatch {
            expected: points.dim(),
            actual: z.dim(),
        });
    }
    Ok(merge_with_tolerance(
        z,
        tau_rel * crate::data::diameter(points),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_rows_form_one_group() {
        let z = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let g = merge_with_tolerance(&z, 1e-9);
        assert_eq!(g.num_groups(), 1);
        assert_eq!(g.representatives, array![[1.0, 2.0]]);
    }

    #[test]
    fn far_rows_are_singletons() {
        let z = array![[0.0], [1.0], [2.0], [3.0]];
        let g = merge_with_tolerance(&z, 0.5);
        assert_eq!(g.num_groups(), 4);
        assert_eq!(g.group_of, vec![0, 1, 2, 3]);
    }

    #[test]
    fn chain_closes_transitively() {
        let tau = 0.1;
        let z = array![[0.0], [0.9 * tau], [1.8 * tau]];
        let g = merge_with_tolerance(&z, tau);
        assert_eq!(g.num_groups(), 1);
        assert_eq!(g.group_sizes(), vec![3]);
    }

    #[test]
    fn tolerance_scales_with_diameter() {
        let x = array![[0.0, 0.0], [10.0, 0.0]];
        let z = array![[5.0, 0.0], [5.005, 0.0]];
        assert_eq!(merge_centroids(&z, &x, 1e-3).unwrap().num_groups(), 1);
        assert_eq!(merge_centroids(&z, &x, 1e-4).unwrap().num_groups(), 2);
        assert!(merge_centroids(&z, &x, 0.0).is_err());
    }
}
