//! Seeded, stream-addressable random number generation.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a
//! 64-bit seed and positioned on an explicit stream. ChaCha is counter based,
//! so two streams of the same seed never overlap and can be consumed from
//! different workers in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Sampling = 1,
    Noise = 2,
    Fixture = 3,
}

pub fn stream_rng(seed: u64, tag: StreamTag, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // High byte carries the tag, the rest the per-tag counter (epoch, trial...).
    rng.set_stream(((tag as u64) << 56) | (counter & 0x00ff_ffff_ffff_ffff));
    rng
}
