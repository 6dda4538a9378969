//! Reproducible random streams.
//!
//! Every randomized quantity draws from a ChaCha8 stream selected by a
//! `(seed, a, b)` triple, so work can be split across threads without the
//! result depending on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for substream `(seed, a, b)`: the seed keys the cipher and the
/// pair `(a, b)` selects a 64-bit stream id.
pub fn substream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    rng
}

/// Generator for a single-index stream.
pub fn stream(seed: u64, a: u64) -> ChaCha8Rng {
    substream(seed, a, u64::MAX)
}
