use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::graph::ClassGraph;
use crate::error::{Error, Result};

pub const GEODESIC_MAGIC: &[u8; 4] = b"GEOD";

/// Symmetric all-pairs shortest-path distances; `f64::INFINITY` marks pairs
/// in different components.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl GeodesicMatrix {
    /// Wraps a row-major `n x n` matrix. Must be symmetric with zero diagonal
    /// and non-negative entries.
    pub fn from_rows(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if v.is_nan() || v < 0.0 || v != entries[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} breaks symmetry or sign"
                    )));
                }
            }
        }
        Ok(GeodesicMatrix { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Component id per sample from the finite entries, numbered in order of
    /// each component's smallest sample.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for i in 0..self.n {
            if comp[i] != usize::MAX {
                continue;
            }
            // Shortest-path closure: row i already lists its whole component.
            for j in i..self.n {
                if self.get(i, j).is_finite() {
                    comp[j] = next;
                }
            }
            next += 1;
        }
        comp
    }

    /// Dump as `b"GEOD"`, `u32` n, then `n*n` little-endian `f32` entries.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.entries.len());
        out.extend_from_slice(GEODESIC_MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        for &v in &self.entries {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dijkstra(graph: &ClassGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in graph.neighbors(node) {
            let cand = d + w;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Frontier {
                    dist: cand,
                    node: next,
                });
            }
        }
    }
    dist
}

/// All-pairs geodesic distances by one Dijkstra run per source. The upper
/// triangle (rows from the smaller index) is mirrored into the lower one so
/// the result is exactly symmetric.
pub fn geodesic_matrix(graph: &ClassGraph) -> GeodesicMatrix {
    let n = graph.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(graph, s)).collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = if i == j { 0.0 } else { rows[i][j] };
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    GeodesicMatrix { n, entries }
}
