//! Seeded generators and deterministic sub-stream derivation.
//!
//! Every worker gets its own ChaCha stream derived from `(seed, stream)`, so
//! results never depend on how cells or chunks are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under the base `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh base seed from `rng` for a batch of chunked sub-streams.
pub fn fork_seed(rng: &mut Rng) -> u64 {
    rng.next_u64()
}

/// Mixes an experiment seed with cell coordinates into one stream id.
pub fn cell_stream(kind_tag: u64, value_index: u64, seed: u64) -> u64 {
    // splitmix64 over the packed coordinates
    let mut z = kind_tag
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(value_index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(seed.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
