//! Cube ingestion, patch extraction, splitting, normalisation and synthetic
//! data generation.

mod cube;
mod normalize;
mod patch;
mod split;
mod synth;

pub use cube::{load_class_names, load_cube, save_cube, HyperCube, CUBE_MAGIC, CUBE_VERSION};
pub use normalize::BandStats;
pub use patch::{extract_patches, mirror_index, Patch};
pub use split::{split, split_indices, SplitIndices, SplitMode, SplitSpec};
pub use synth::{synthesize, ManifoldKind, SyntheticData, SyntheticSpec};
