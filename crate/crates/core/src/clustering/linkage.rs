use ndarray::Array2;

use super::{check_k, Partition};
use crate::error::Result;

/// Agglomerative single-linkage clustering cut at `k` clusters.
///
/// Equivalent to Kruskal's algorithm over all pairs ordered by
/// `(distance, i, j)`: among equally close pairs the lexicographically
/// smallest is merged first. Cluster ids follow first appearance.
pub fn single_linkage(points: &Array2<f64>, k: usize) -> Result<Partition> {
    let m = points.nrows();
    check_k(k, m)?;
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        let xi = points.row(i);
        for j in (i + 1)..m {
            let d2: f64 = xi
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            edges.push((d2, i as u32, j as u32));
        }
    }
    edges.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut clusters = m;
    for &(_, i, j) in &edges {
        if clusters == k {
            break;
        }
        let (ri, rj) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
            clusters -= 1;
        }
    }
    let roots: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
    Ok(Partition::from_labels(&roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::FilterError;
    use ndarray::array;

    #[test]
    fn k_equals_m_gives_singletons() {
        let x = array![[0.0], [1.0], [5.0]];
        let p = single_linkage(&x, 3).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 2]);
    }

    #[test]
    fn separated_pairs() {
        let x = array![[0.0, 0.0], [5.0, 5.0], [0.0, 0.1], [5.0, 5.1]];
        let p = single_linkage(&x, 2).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 0, 1]);
    }

    #[test]
    fn collinear_chain() {
        let x = array![[0.0], [1.0], [2.5], [3.5]];
        let p = single_linkage(&x, 2).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 1, 1]);
    }

    #[test]
    fn ties_merge_lowest_pair_first() {
        // Three equidistant points on a line: gaps (0,1) and (1,2) tie.
        let x = array![[0.0], [1.0], [2.0]];
        let p = single_linkage(&x, 2).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 1]);
    }

    #[test]
    fn k_out_of_range() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            single_linkage(&x, 0),
            Err(FilterError::KOutOfRange { .. })
        ));
        assert!(matches!(
            single_linkage(&x, 3),
            Err(FilterError::KOutOfRange { .. })
        ));
    }
}
