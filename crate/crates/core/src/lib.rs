//! Deep manifold embedding for labelled high-dimensional data.
//!
//! Each class of the training set is modelled as a manifold: a b-nearest-
//! neighbour graph gives geodesic distances, and complete-linkage
//! agglomeration splits the class into compact sub-classes. A small network
//! is then trained with softmax cross-entropy plus a loss that pulls each
//! sub-class together in feature space and keeps sub-classes of different
//! classes at least a margin apart.
//!
//! Modules, in pipeline order: [`dataset`], [`manifold`], [`loss`],
//! [`model`], [`trainer`], [`eval`].

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod loss;
pub mod manifold;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use loss::{FeatureBatch, LossParams, LossReport, LossTerms};
pub use manifold::{GeodesicMatrix, ManifoldParams, SubClassPartition};
pub use model::{ModelParams, NetworkSpec};
pub use trainer::{TrainConfig, TrainLog};
