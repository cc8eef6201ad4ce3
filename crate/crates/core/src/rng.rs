//! Seeded generators.
//!
//! Every stochastic routine takes a `u64` seed and derives its generator
//! here, so results are reproducible across platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-generator: same seed, distinct ChaCha stream.
///
/// Used wherever work is split into units (trees, documents, samples) that
/// may run in parallel; each unit owns its stream so the result does not
/// depend on scheduling.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
