//! Manifold-embedding loss on a mini-batch of features.
//!
//! * `L0`: for every sub-class present in the batch, the double sum of
//!   squared distances over all ordered member pairs.
//! * `Ld`: for every ordered pair of sub-classes from different classes, the
//!   margin `delta - D_H`, where `D_H` is the directed Hausdorff distance with
//!   squared Euclidean point distance. With `hinge` the margin is clamped at
//!   zero.
//! * total: `L0 + beta * Ld`.
//!
//! Gradients are exact for the loss as implemented. The Hausdorff gradient
//! flows only through the pair attaining the max-min; ties pick the smallest
//! (outer, inner) index.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    /// Margin between sub-classes of different classes.
    pub delta: f64,
    /// Weight of the diversity term.
    pub beta: f64,
    /// Clamp each diversity term at zero.
    pub hinge: bool,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            delta: 1.0,
            beta: 1e-4,
            hinge: true,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "margin delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Features of a mini-batch, one row per sample, tagged `(class, sub-class)`.
#[derive(Debug, Clone, Copy)]
pub struct FeatureBatch<'a> {
    features: ArrayView2<'a, f64>,
    tags: &'a [(u16, usize)],
}

impl<'a> FeatureBatch<'a> {
    pub fn new(features: ArrayView2<'a, f64>, tags: &'a [(u16, usize)]) -> Result<Self> {
        if features.nrows() != tags.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} tags",
                features.nrows(),
                tags.len()
            )));
        }
        Ok(FeatureBatch { features, tags })
    }

    pub fn features(&self) -> ArrayView2<'a, f64> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Batch rows of each sub-class, in `(class, sub-class)` order.
    fn groups(&self) -> Vec<((u16, usize), Vec<usize>)> {
        let mut map: BTreeMap<(u16, usize), Vec<usize>> = BTreeMap::new();
        for (row, &tag) in self.tags.iter().enumerate() {
            map.entry(tag).or_default().push(row);
        }
        map.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub l0: f64,
    pub ld: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub terms: LossTerms,
    /// Gradient of `total` with respect to each feature row.
    pub grads: Array2<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pair_sum(features: ArrayView2<f64>, rows: &[usize]) -> f64 {
    let mut total = 0.0;
    for &o in rows {
        for &i in rows {
            if i != o {
                total += sq_dist(features.row(o), features.row(i));
            }
        }
    }
    total
}

/// Double sum of squared distances over all ordered pairs of the rows.
pub fn subclass_loss(features: ArrayView2<f64>) -> f64 {
    let rows: Vec<usize> = (0..features.nrows()).collect();
    pair_sum(features, &rows)
}

pub fn embedding_loss(batch: &FeatureBatch) -> f64 {
    batch
        .groups()
        .iter()
        .map(|(_, rows)| pair_sum(batch.features, rows))
        .sum()
}

/// `max_a min_b |a - b|^2` with the attaining `(a, b)` row pair.
fn directed_hausdorff(
    features: ArrayView2<f64>,
    from: &[usize],
    to: &[usize],
) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
    for &a in from {
        let mut nearest = (f64::INFINITY, usize::MAX);
        for &b in to {
            let d = sq_dist(features.row(a), features.row(b));
            if d < nearest.0 {
                nearest = (d, b);
            }
        }
        if nearest.0 > best.0 {
            best = (nearest.0, a, nearest.1);
        }
    }
    best
}

/// Directed Hausdorff distance from set `a` to set `b` (rows are points),
/// with squared Euclidean point distance.
pub fn hausdorff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "Hausdorff distance of an empty set".into(),
        ));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "point sets of dimension {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for pa in a.rows() {
        let nearest = b
            .rows()
            .into_iter()
            .map(|pb| sq_dist(pa, pb))
            .fold(f64::INFINITY, f64::min);
        best = best.max(nearest);
    }
    Ok(best)
}

struct DiversityTerm {
    value: f64,
    active: bool,
    from: usize,
    to: usize,
}

fn diversity_terms(batch: &FeatureBatch, params: &LossParams) -> Vec<DiversityTerm> {
    let groups = batch.groups();
    let mut terms = Vec::new();
    for ((cs, _), from) in &groups {
        for ((ct, _), to) in &groups {
            if cs == ct {
                continue;
            }
            let (d, a, b) = directed_hausdorff(batch.features, from, to);
            let raw = params.delta - d;
            let active = !params.hinge || raw > 0.0;
            terms.push(DiversityTerm {
                value: if active { raw } else { 0.0 },
                active,
                from: a,
                to: b,
            });
        }
    }
    terms
}

pub fn diversity_loss(batch: &FeatureBatch, params: &LossParams) -> f64 {
    diversity_terms(batch, params).iter().map(|t| t.value).sum()
}

pub fn total_loss(batch: &FeatureBatch, params: &LossParams) -> LossTerms {
    let l0 = embedding_loss(batch);
    let ld = diversity_loss(batch, params);
    LossTerms {
        l0,
        ld,
        total: l0 + params.beta * ld,
    }
}

/// Loss terms and the gradient of `total` with respect to every feature.
pub fn loss_gradients(batch: &FeatureBatch, params: &LossParams) -> LossReport {
    let f = batch.features;
    let mut grads = Array2::<f64>::zeros(f.raw_dim());

    let mut l0 = 0.0;
    for (_, rows) in batch.groups() {
        l0 += pair_sum(f, &rows);
        for &a in &rows {
            let mut g = grads.row_mut(a);
            for &i in &rows {
                if i != a {
                    g.zip_mut_with(&(&f.row(a) - &f.row(i)), |acc, d| *acc += 4.0 * d);
                }
            }
        }
    }

    let mut ld = 0.0;
    for term in diversity_terms(batch, params) {
        ld += term.value;
        if !term.active {
            continue;
        }
        // d(-|a - b|^2)/da = -2 (a - b), and the opposite sign for b.
        let diff = &f.row(term.from) - &f.row(term.to);
        let scale = 2.0 * params.beta;
        grads
            .row_mut(term.from)
            .zip_mut_with(&diff, |acc, d| *acc -= scale * d);
        grads
            .row_mut(term.to)
            .zip_mut_with(&diff, |acc, d| *acc += scale * d);
    }

    LossReport {
        terms: LossTerms {
            l0,
            ld,
            total: l0 + params.beta * ld,
        },
        grads,
    }
}

/// Sum of gradient rows per sub-class (zero for the `L0` part).
pub fn group_gradient_sums(batch: &FeatureBatch, grads: ArrayView2<f64>) -> Vec<Vec<f64>> {
    batch
        .groups()
        .iter()
        .map(|(_, rows)| grads.select(Axis(0), rows).sum_axis(Axis(0)).to_vec())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn subclass_loss_examples() {
        assert_eq!(subclass_loss(array![[0.0], [2.0]].view()), 8.0);
        assert_eq!(subclass_loss(array![[1.5, 2.0]].view()), 0.0);
        assert_eq!(
            subclass_loss(array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]].view()),
            0.0
        );
    }

    #[test]
    fn embedding_loss_sums_subclasses() {
        let f = array![[0.0], [2.0], [5.0], [7.0]];
        let tags = [(1, 0), (1, 0), (1, 1), (1, 1)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        assert_eq!(embedding_loss(&batch), 16.0);
        let singles = [(1, 0), (1, 1), (2, 0), (2, 1)];
        assert_eq!(
            embedding_loss(&FeatureBatch::new(f.view(), &singles).unwrap()),
            0.0
        );
    }

    #[test]
    fn hausdorff_examples() {
        let a = array![[0.0]];
        let b = array![[3.0], [4.0]];
        assert_eq!(hausdorff(a.view(), b.view()).unwrap(), 9.0);
        let a = array![[0.0], [10.0]];
        let b = array![[0.0]];
        assert_eq!(hausdorff(a.view(), b.view()).unwrap(), 100.0);
        assert_eq!(hausdorff(b.view(), a.view()).unwrap(), 0.0);
        assert_eq!(hausdorff(a.view(), a.view()).unwrap(), 0.0);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(hausdorff(empty.view(), a.view()).is_err());
    }

    #[test]
    fn coincident_classes_pay_full_margin() {
        let f = array![[0.5, 0.5], [0.5, 0.5]];
        let tags = [(1, 0), (2, 0)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        let p = LossParams {
            delta: 1.0,
            beta: 1e-4,
            hinge: true,
        };
        assert_eq!(diversity_loss(&batch, &p), 2.0);
        let one_class = [(1, 0), (1, 1)];
        let batch = FeatureBatch::new(f.view(), &one_class).unwrap();
        assert_eq!(diversity_loss(&batch, &p), 0.0);
    }

    #[test]
    fn hinge_versus_literal_margin() {
        let f = array![[0.0], [3.0]];
        let tags = [(1, 0), (2, 0)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        let hinge = LossParams {
            delta: 1.0,
            beta: 1.0,
            hinge: true,
        };
        assert_eq!(diversity_loss(&batch, &hinge), 0.0);
        let literal = LossParams {
            hinge: false,
            ..hinge
        };
        assert_eq!(diversity_loss(&batch, &literal), 2.0 * (1.0 - 9.0));
        // Literal form: d/da of -(a-b)^2 = -2(a-b) = 6 for a=0, b=3, twice.
        let r = loss_gradients(&batch, &literal);
        assert_eq!(r.grads, array![[12.0], [-12.0]]);
        assert_eq!(loss_gradients(&batch, &hinge).grads, array![[0.0], [0.0]]);
    }

    #[test]
    fn total_combines_terms() {
        // Two sub-classes {0,2} with L0 = 16, and one coincident cross-class
        // pair giving Ld = 2.
        let f = array![[0.0], [2.0], [0.0], [2.0]];
        let tags = [(1, 0), (1, 0), (2, 0), (2, 0)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        let p = LossParams {
            delta: 1.0,
            beta: 1e-4,
            hinge: true,
        };
        let t = total_loss(&batch, &p);
        assert_eq!(t.l0, 16.0);
        assert_eq!(t.ld, 2.0);
        assert!((t.total - 16.0002).abs() < 1e-12);
        let zero_beta = total_loss(&batch, &LossParams { beta: 0.0, ..p });
        assert_eq!(zero_beta.total, zero_beta.l0);

        let empty = Array2::<f64>::zeros((0, 3));
        let batch = FeatureBatch::new(empty.view(), &[]).unwrap();
        assert_eq!(total_loss(&batch, &p).total, 0.0);
    }

    #[test]
    fn subclass_gradient_example() {
        let f = array![[0.0], [2.0]];
        let tags = [(1, 0), (1, 0)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        let r = loss_gradients(&batch, &LossParams::default());
        assert_eq!(r.grads[[0, 0]], -8.0);
        assert_eq!(r.grads[[1, 0]], 8.0);
    }

    #[test]
    fn collapsed_and_separated_has_zero_gradient() {
        let f = array![[0.0, 0.0], [0.0, 0.0], [5.0, 0.0], [5.0, 0.0]];
        let tags = [(1, 0), (1, 0), (2, 0), (2, 0)];
        let batch = FeatureBatch::new(f.view(), &tags).unwrap();
        let r = loss_gradients(&batch, &LossParams::default());
        assert_eq!(r.terms.total, 0.0);
        assert!(r.grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mismatched_tags_rejected() {
        let f = array![[0.0]];
        assert!(FeatureBatch::new(f.view(), &[(1, 0), (1, 0)]).is_err());
    }
}
