//! Per-class manifold modelling: b-NN graph, geodesic distances and
//! sub-class partitioning.

mod cluster;
mod geodesic;
mod graph;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

pub use cluster::{cluster_subclasses, minimax_objective, ClassClustering};
pub use geodesic::{dijkstra, geodesic_matrix, GeodesicMatrix, GEODESIC_MAGIC};
pub use graph::{build_class_graph, euclidean, ClassGraph};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifoldParams {
    /// Sub-classes per class.
    pub k: usize,
    /// Neighbours per node in the class graph.
    pub b: usize,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams { k: 5, b: 5 }
    }
}

impl ManifoldParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.b == 0 {
            return Err(Error::InvalidArgument(format!(
                "k and b must be >= 1 (k={}, b={})",
                self.k, self.b
            )));
        }
        Ok(())
    }
}

/// Sub-classes of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPartition {
    pub class_id: u16,
    /// Positions (into the modelled sample list) of this class's samples.
    pub samples: Vec<usize>,
    pub clustering: ClassClustering,
    /// Largest geodesic distance inside any sub-class.
    pub max_diameter: f64,
}

/// Sub-class assignment of every training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SubClassPartition {
    pub params: ManifoldParams,
    pub classes: Vec<ClassPartition>,
    tags: Vec<(u16, usize)>,
}

impl SubClassPartition {
    /// Assembles a partition from per-sample `(class, sub-class)` tags.
    pub fn from_tags(params: ManifoldParams, tags: Vec<(u16, usize)>) -> Self {
        let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, &(c, _)) in tags.iter().enumerate() {
            by_class.entry(c).or_default().push(i);
        }
        let classes = by_class
            .into_iter()
            .map(|(class_id, samples)| {
                let assignment: Vec<usize> = samples.iter().map(|&i| tags[i].1).collect();
                let num_subclasses = assignment.iter().max().map_or(0, |m| m + 1);
                ClassPartition {
                    class_id,
                    samples,
                    clustering: ClassClustering {
                        assignment,
                        num_subclasses,
                        components: 0,
                        euclidean_fallback: false,
                        warnings: Vec::new(),
                    },
                    max_diameter: f64::NAN,
                }
            })
            .collect();
        SubClassPartition {
            params,
            classes,
            tags,
        }
    }

    /// `(class, sub-class)` of each sample position.
    pub fn tags(&self) -> &[(u16, usize)] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Text dump: a `# k=<k> b=<b>` header, then one
    /// `sample_index class_id subclass_id` line per sample. `sample_ids`
    /// maps positions to the written index; sub-class ids are 1-based.
    pub fn to_text(&self, sample_ids: &[usize]) -> String {
        let mut out = format!("# k={} b={}\n", self.params.k, self.params.b);
        for (pos, &(class, sub)) in self.tags.iter().enumerate() {
            writeln!(out, "{} {} {}", sample_ids[pos], class, sub + 1).unwrap();
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output, returning the written sample
    /// indices alongside the partition.
    pub fn from_text(text: &str) -> Result<(Vec<usize>, Self)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::format("partition", "empty file"))?;
        let mut k = None;
        let mut b = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("k", v)) => k = v.parse().ok(),
                Some(("b", v)) => b = v.parse().ok(),
                _ => {}
            }
        }
        let params = match (k, b) {
            (Some(k), Some(b)) => ManifoldParams { k, b },
            _ => return Err(Error::format("partition", format!("bad header {header:?}"))),
        };
        let mut ids = Vec::new();
        let mut tags = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = match f.as_slice() {
                [i, c, s] => match (i.parse::<usize>(), c.parse::<u16>(), s.parse::<usize>()) {
                    (Ok(i), Ok(c), Ok(s)) if s >= 1 => Some((i, c, s - 1)),
                    _ => None,
                },
                _ => None,
            };
            let (i, c, s) =
                parsed.ok_or_else(|| Error::format("partition", format!("bad line {line:?}")))?;
            ids.push(i);
            tags.push((c, s));
        }
        Ok((ids, SubClassPartition::from_tags(params, tags)))
    }
}

/// Result of modelling one class, kept with its geodesic matrix for dumps.
#[derive(Debug, Clone)]
pub struct ClassModel {
    pub partition: ClassPartition,
    pub geodesic: Option<GeodesicMatrix>,
}

/// Runs graph construction, geodesic distances and clustering for every
/// class present in `labels`. Classes are processed in parallel and
/// assembled in ascending class order.
pub fn model_manifolds_detailed<P: AsRef<[f64]> + Sync>(
    points: &[P],
    labels: &[u16],
    params: ManifoldParams,
) -> Result<Vec<ClassModel>> {
    params.validate()?;
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let classes: Vec<(u16, Vec<usize>)> = by_class.into_iter().collect();
    classes
        .into_par_iter()
        .map(|(class_id, samples)| {
            let local: Vec<&[f64]> = samples.iter().map(|&i| points[i].as_ref()).collect();
            if local.len() == 1 {
                return Ok(ClassModel {
                    partition: ClassPartition {
                        class_id,
                        samples,
                        clustering: ClassClustering {
                            assignment: vec![0],
                            num_subclasses: 1,
                            components: 1,
                            euclidean_fallback: false,
                            warnings: vec!["class has a single training sample".into()],
                        },
                        max_diameter: 0.0,
                    },
                    geodesic: None,
                });
            }
            let graph = build_class_graph(&local, params.b)?;
            let s = geodesic_matrix(&graph);
            let clustering = cluster_subclasses(&s, params.k, Some(&local))?;
            let max_diameter = minimax_objective(&s, &clustering.assignment);
            Ok(ClassModel {
                partition: ClassPartition {
                    class_id,
                    samples,
                    clustering,
                    max_diameter,
                },
                geodesic: Some(s),
            })
        })
        .collect()
}

pub fn model_manifolds<P: AsRef<[f64]> + Sync>(
    points: &[P],
    labels: &[u16],
    params: ManifoldParams,
) -> Result<SubClassPartition> {
    let models = model_manifolds_detailed(points, labels, params)?;
    Ok(assemble(
        params,
        labels.len(),
        models.into_iter().map(|m| m.partition).collect(),
    ))
}

pub fn assemble(
    params: ManifoldParams,
    n: usize,
    classes: Vec<ClassPartition>,
) -> SubClassPartition {
    let mut tags = vec![(0u16, 0usize); n];
    for c in &classes {
        for (local, &pos) in c.samples.iter().enumerate() {
            tags[pos] = (c.class_id, c.clustering.assignment[local]);
        }
    }
    SubClassPartition {
        params,
        classes,
        tags,
    }
}
