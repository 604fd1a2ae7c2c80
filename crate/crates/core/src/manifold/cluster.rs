//! Complete-linkage agglomeration on geodesic distances.
//!
//! Clusters are keyed by their smallest member, so scanning candidate pairs
//! in ascending key order and keeping the first strict minimum yields the
//! lexicographic tie-break on (smallest member, other smallest member).

use super::geodesic::GeodesicMatrix;
use super::graph::euclidean;
use crate::error::{Error, Result};

/// Sub-class assignment for the samples of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassClustering {
    /// Sub-class of each sample, `0..num_subclasses`, numbered in order of
    /// each sub-class's smallest sample.
    pub assignment: Vec<usize>,
    pub num_subclasses: usize,
    /// Connected components of the neighbourhood graph.
    pub components: usize,
    /// Set when components had to be joined through Euclidean distance.
    pub euclidean_fallback: bool,
    pub warnings: Vec<String>,
}

impl ClassClustering {
    pub fn members(&self, subclass: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == subclass)
            .collect()
    }
}

/// Largest within-sub-class geodesic distance (the minimax-diameter objective).
pub fn minimax_objective(s: &GeodesicMatrix, assignment: &[usize]) -> f64 {
    let n = s.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if assignment[i] == assignment[j] {
                worst = worst.max(s.get(i, j));
            }
        }
    }
    worst
}

/// Working state: `dist[a * n + b]` is the linkage distance between the
/// clusters keyed `a` and `b`; only active keys are meaningful.
struct Agglomeration {
    n: usize,
    active: Vec<usize>,
    members: Vec<Vec<usize>>,
    dist: Vec<f64>,
}

impl Agglomeration {
    fn singletons(n: usize, dist: Vec<f64>) -> Self {
        Agglomeration {
            n,
            active: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
            dist,
        }
    }

    fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for (pos, &a) in self.active.iter().enumerate() {
            for &b in &self.active[pos + 1..] {
                let d = self.dist[a * self.n + b];
                if d < best.2 || best.0 == usize::MAX {
                    best = (a, b, d);
                }
            }
        }
        best
    }

    /// Merges `b` into `a` (`a < b`), updating linkage with `combine`.
    fn merge(&mut self, a: usize, b: usize, combine: fn(f64, f64) -> f64) {
        let n = self.n;
        self.active.retain(|&c| c != b);
        let moved = std::mem::take(&mut self.members[b]);
        self.members[a].extend(moved);
        for &c in &self.active {
            if c != a {
                let d = combine(self.dist[a * n + c], self.dist[b * n + c]);
                self.dist[a * n + c] = d;
                self.dist[c * n + a] = d;
            }
        }
    }

    fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (id, &key) in self.active.iter().enumerate() {
            for &m in &self.members[key] {
                out[m] = id;
            }
        }
        out
    }
}

/// Partitions one class into at most `k` sub-classes.
///
/// Merges the closest pair of clusters under complete linkage until
/// `max(k, components)` clusters remain. If the neighbourhood graph has more
/// than `k` components, components are then joined by their closest
/// Euclidean sample pair (needs `points`), and the result is flagged.
pub fn cluster_subclasses<P: AsRef<[f64]>>(
    s: &GeodesicMatrix,
    k: usize,
    points: Option<&[P]>,
) -> Result<ClassClustering> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "sub-class count k must be >= 1".into(),
        ));
    }
    let n = s.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot cluster an empty class".into(),
        ));
    }
    let comp = s.components();
    let components = comp.iter().max().map_or(0, |c| c + 1);
    let mut warnings = Vec::new();
    if n < k {
        warnings.push(format!(
            "class has {n} samples but k={k}; every sample is its own sub-class"
        ));
        return Ok(ClassClustering {
            assignment: (0..n).collect(),
            num_subclasses: n,
            components,
            euclidean_fallback: false,
            warnings,
        });
    }

    let mut agg = Agglomeration::singletons(n, (0..n * n).map(|i| s.get(i / n, i % n)).collect());
    let target = k.max(components);
    while agg.active.len() > target {
        let (a, b, d) = agg.closest_pair();
        debug_assert!(d.is_finite(), "complete linkage tried to cross components");
        agg.merge(a, b, f64::max);
    }

    let mut euclidean_fallback = false;
    if agg.active.len() > k {
        let points = points.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{components} graph components exceed k={k} and no sample coordinates were given"
            ))
        })?;
        if points.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} points for a {n}-sample geodesic matrix",
                points.len()
            )));
        }
        euclidean_fallback = true;
        warnings.push(format!(
            "{components} graph components exceed k={k}; joined by Euclidean single linkage"
        ));
        let mut single = vec![f64::INFINITY; n * n];
        for (pos, &a) in agg.active.iter().enumerate() {
            for &b in &agg.active[pos + 1..] {
                let mut d = f64::INFINITY;
                for &i in &agg.members[a] {
                    for &j in &agg.members[b] {
                        d = d.min(euclidean(points[i].as_ref(), points[j].as_ref()));
                    }
                }
                single[a * n + b] = d;
                single[b * n + a] = d;
            }
        }
        agg.dist = single;
        while agg.active.len() > k {
            let (a, b, _) = agg.closest_pair();
            agg.merge(a, b, f64::min);
        }
    }

    Ok(ClassClustering {
        num_subclasses: agg.active.len(),
        assignment: agg.assignment(),
        components,
        euclidean_fallback,
        warnings,
    })
}
