//! Seeded random streams.
//!
//! Every Monte-Carlo routine takes a master seed and a stream index; the
//! pair selects an independent ChaCha stream, so results do not depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every Monte-Carlo routine in the crate.
pub type SimRng = ChaCha8Rng;

/// Returns the generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Folds a second index into a stream id, for nested sweeps.
pub fn substream(outer: u64, inner: u64) -> u64 {
    outer.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ inner
}
