//! Seeded, splittable random streams.
//!
//! Every consumer of randomness derives its generator from a `(seed, stream)`
//! pair. ChaCha is counter based, so stream `i` is independent of how many
//! numbers any other stream has drawn, and results do not depend on which
//! thread happens to run which stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of the family keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sub-family key, so that e.g. restart `r` of tensor `t` gets its own stream space.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
