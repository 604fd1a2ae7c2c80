//! Planted-manifold synthetic datasets.
//!
//! Each class lives on its own low-dimensional curve or blob layout, embedded
//! isometrically into `ambient_dim` dimensions. A class is made of
//! `subclusters_per_class` disjoint segments of its curve, separated by gaps
//! much longer than the sample spacing, so the sub-class ground truth is
//! recoverable from geodesic distances. Curve positions lie on a fixed grid;
//! the seed only drives the isotropic Gaussian noise, so with zero noise the
//! output does not depend on the seed at all.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::patch::Patch;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    SwissRoll,
    Arc,
    GaussianBlob,
}

impl ManifoldKind {
    fn intrinsic_dims(self) -> usize {
        match self {
            ManifoldKind::SwissRoll => 3,
            ManifoldKind::Arc | ManifoldKind::GaussianBlob => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::SwissRoll => "swiss-roll",
            ManifoldKind::Arc => "arc",
            ManifoldKind::GaussianBlob => "gaussian-blob",
        }
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss-roll" => Ok(ManifoldKind::SwissRoll),
            "arc" => Ok(ManifoldKind::Arc),
            "gaussian-blob" => Ok(ManifoldKind::GaussianBlob),
            other => Err(Error::InvalidArgument(format!(
                "unknown manifold {other:?} (expected swiss-roll, arc or gaussian-blob)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: u16,
    pub subclusters_per_class: usize,
    pub samples_per_subcluster: usize,
    pub ambient_dim: usize,
    pub manifold: ManifoldKind,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.num_classes == 0 {
            return bad("synthetic spec needs at least one class".into());
        }
        if self.subclusters_per_class == 0 || self.samples_per_subcluster == 0 {
            return bad("subclusters and samples per subcluster must be positive".into());
        }
        if self.subclusters_per_class > u16::MAX as usize {
            return bad("too many subclusters".into());
        }
        if self.ambient_dim < self.manifold.intrinsic_dims() {
            return bad(format!(
                "{} needs ambient_dim >= {}, got {}",
                self.manifold.name(),
                self.manifold.intrinsic_dims(),
                self.ambient_dim
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

/// Generated samples in class-major, then subcluster, then sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    /// Class ids, `1..=num_classes`.
    pub labels: Vec<u16>,
    /// Ground-truth subcluster within the class, `0..subclusters_per_class`.
    pub subclusters: Vec<u16>,
}

impl SyntheticData {
    /// Each sample as a 1x1 patch; sample `i` sits at pixel `(i, 0)`.
    pub fn to_patches(&self) -> Vec<Patch> {
        self.points
            .iter()
            .zip(&self.labels)
            .enumerate()
            .map(|(i, (p, &label))| Patch {
                center_row: i,
                center_col: 0,
                window: 1,
                bands: self.dim,
                tensor: p.iter().map(|&v| v as f32).collect(),
                label,
            })
            .collect()
    }
}

// Angular layout of subcluster segments: each occupies SEGMENT_SHARE of its
// period and the rest is an empty gap.
const SEGMENT_SHARE: f64 = 0.4;
const ARC_BASE_RADIUS: f64 = 2.0;
const ARC_RADIUS_STEP: f64 = 0.5;
const ROLL_SCALE: f64 = 0.2;
const ROLL_LAYER_STEP: f64 = 1.0;
const BLOB_SPACING: f64 = 3.0;
const LAYOUT_SEED: u64 = 0x5eed_1a70;

/// Intrinsic (3-D) position of sample `i` of subcluster `j` of class `s`.
fn intrinsic_point(spec: &SyntheticSpec, s: usize, j: usize, i: usize) -> [f64; 3] {
    let m = spec.subclusters_per_class as f64;
    let frac = (i as f64 + 0.5) / spec.samples_per_subcluster as f64;
    match spec.manifold {
        ManifoldKind::Arc => {
            let period = (0.9 * 2.0 * PI / m).min(1.5);
            let theta = period * (j as f64 + SEGMENT_SHARE * frac);
            let r = ARC_BASE_RADIUS + ARC_RADIUS_STEP * s as f64;
            [r * theta.cos(), r * theta.sin(), 0.0]
        }
        ManifoldKind::SwissRoll => {
            let period = 3.0 * PI / m;
            let t = 1.5 * PI + period * (j as f64 + SEGMENT_SHARE * frac);
            [
                ROLL_SCALE * t * t.cos(),
                ROLL_LAYER_STEP * s as f64,
                ROLL_SCALE * t * t.sin(),
            ]
        }
        ManifoldKind::GaussianBlob => [BLOB_SPACING * s as f64, BLOB_SPACING * j as f64, 0.0],
    }
}

/// Fixed orthonormal `ambient x 3` embedding (Gram-Schmidt on Gaussian columns).
fn embedding(ambient: usize) -> Vec<[f64; 3]> {
    let mut rng = rng::seeded(LAYOUT_SEED ^ ambient as u64);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(3);
    while cols.len() < 3.min(ambient) {
        let mut v: Vec<f64> = (0..ambient).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    (0..ambient)
        .map(|r| {
            let mut row = [0.0; 3];
            for (k, c) in cols.iter().enumerate() {
                row[k] = c[r];
            }
            row
        })
        .collect()
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let basis = embedding(spec.ambient_dim);
    let mut rng = rng::seeded(spec.seed);
    let total =
        spec.num_classes as usize * spec.subclusters_per_class * spec.samples_per_subcluster;
    let mut data = SyntheticData {
        dim: spec.ambient_dim,
        points: Vec::with_capacity(total),
        labels: Vec::with_capacity(total),
        subclusters: Vec::with_capacity(total),
    };
    for s in 0..spec.num_classes as usize {
        for j in 0..spec.subclusters_per_class {
            for i in 0..spec.samples_per_subcluster {
                let z = intrinsic_point(spec, s, j, i);
                let point = basis
                    .iter()
                    .map(|row| {
                        let clean = row[0] * z[0] + row[1] * z[1] + row[2] * z[2];
                        if spec.noise_sigma > 0.0 {
                            clean + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal)
                        } else {
                            clean
                        }
                    })
                    .collect();
                data.points.push(point);
                data.labels.push(s as u16 + 1);
                data.subclusters.push(j as u16);
            }
        }
    }
    Ok(data)
}
