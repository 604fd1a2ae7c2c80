//! Named random streams derived from a single root seed.
//!
//! Every component that needs randomness (initialisation, batching,
//! synthesis, splitting) draws from its own ChaCha stream so that one of
//! them can be varied without perturbing the others.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Batching,
    Synthesis,
    Split,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Batching => 2,
            Stream::Synthesis => 3,
            Stream::Split => 4,
        }
    }
}

/// Generator for `stream` under `root`.
pub fn stream_rng(root: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream.id());
    rng
}

/// A 64-bit seed for `stream`, for components configured by seed rather than
/// by generator.
pub fn derive_seed(root: u64, stream: Stream) -> u64 {
    stream_rng(root, stream).next_u64()
}

/// Generator for a component that was handed a plain seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
