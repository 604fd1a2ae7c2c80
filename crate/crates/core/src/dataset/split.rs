//! Stratified, seed-deterministic train/test splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::patch::Patch;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// Fixed number of training samples per class.
    CountPerClass(usize),
    /// Fraction of each class, `round(fraction * n)` with a minimum of one.
    FractionPerClass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

/// Positions into the input list, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn train_count(&self, class: u16, available: usize) -> Result<usize> {
        match self.mode {
            SplitMode::CountPerClass(n) => {
                if n == 0 {
                    return Err(Error::InvalidArgument(
                        "split count must be positive".into(),
                    ));
                }
                if n > available {
                    return Err(Error::NotEnoughSamples {
                        class,
                        available,
                        requested: n,
                    });
                }
                Ok(n)
            }
            SplitMode::FractionPerClass(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "split fraction must lie in (0, 1], got {f}"
                    )));
                }
                Ok(((f * available as f64).round() as usize).clamp(1, available))
            }
        }
    }
}

/// Splits sample positions by class label. Classes are processed in
/// ascending label order, each shuffled by the one seeded generator.
pub fn split_indices(labels: &[u16], spec: &SplitSpec) -> Result<SplitIndices> {
    let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = rng::seeded(spec.seed);
    let mut in_train = vec![false; labels.len()];
    for (&class, members) in &mut by_class {
        let count = spec.train_count(class, members.len())?;
        members.shuffle(&mut rng);
        for &i in &members[..count] {
            in_train[i] = true;
        }
    }
    let (train, test) = (0..labels.len()).partition(|&i| in_train[i]);
    Ok(SplitIndices { train, test })
}

pub fn split(samples: &[Patch], spec: &SplitSpec) -> Result<(Vec<Patch>, Vec<Patch>)> {
    let labels: Vec<u16> = samples.iter().map(|p| p.label).collect();
    let idx = split_indices(&labels, spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&idx.train), pick(&idx.test)))
}
