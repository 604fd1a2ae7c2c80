use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Undirected b-nearest-neighbour graph over the samples of one class.
///
/// An edge joins `i` and `j` when either lists the other among its `b`
/// nearest neighbours (union rule); its weight is their Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGraph {
    b: usize,
    /// Neighbours of each node in ascending index order.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl ClassGraph {
    /// Builds a graph directly from weighted undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!(
                    "bad edge ({i}, {j}) for n={n}"
                )));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad edge weight {w}")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.0.cmp(&b.0));
            list.dedup_by_key(|e| e.0);
        }
        Ok(ClassGraph { b: 0, adjacency })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |e| e.0)
            .ok()
            .map(|pos| self.adjacency[i][pos].1)
    }

    /// Component id per node; ids are numbered in order of each component's
    /// smallest node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Builds the union-symmetrised `b`-NN graph. Neighbour ties are broken by
/// the smaller sample index.
pub fn build_class_graph<P: AsRef<[f64]> + Sync>(points: &[P], b: usize) -> Result<ClassGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a class graph needs at least 2 samples, got {n}"
        )));
    }
    if b == 0 {
        return Err(Error::InvalidArgument(
            "neighbour count b must be >= 1".into(),
        ));
    }
    // Upper-triangle distances, so both directions share one value.
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| euclidean(points[i].as_ref(), points[j].as_ref()))
                .collect()
        })
        .collect();
    let d = |i: usize, j: usize| {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        dist[lo][hi - lo - 1]
    };
    let mut linked = vec![false; n * n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&x, &y| d(i, x).total_cmp(&d(i, y)).then(x.cmp(&y)));
        for &j in others.iter().take(b) {
            linked[i * n + j] = true;
            linked[j * n + i] = true;
        }
    }
    let adjacency = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| linked[i * n + j])
                .map(|j| (j, d(i, j)))
                .collect()
        })
        .collect();
    Ok(ClassGraph { b, adjacency })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_union_rule() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let g = build_class_graph(&pts, 1).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(0, 1), Some(1.0));
        assert_eq!(g.weight(1, 2), Some(2.0));
        assert_eq!(g.weight(0, 2), None);
    }

    #[test]
    fn large_b_gives_complete_graph() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let g = build_class_graph(&pts, 5).unwrap();
        assert_eq!(g.edge_count(), 15);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(g.weight(i, j), Some(euclidean(&pts[i], &pts[j])));
                }
            }
        }
    }

    #[test]
    fn duplicate_points_zero_edge() {
        let g = build_class_graph(&[vec![2.0, 2.0], vec![2.0, 2.0]], 1).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), Some(0.0));
    }

    #[test]
    fn too_small_rejected() {
        assert!(build_class_graph(&[vec![1.0]], 1).is_err());
    }

    #[test]
    fn components_numbered_by_smallest_node() {
        let g = ClassGraph::from_edges(5, &[(3, 4, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(g.components(), vec![0, 1, 0, 2, 2]);
    }
}
