//! Seed handling. Every random quantity in the crate is drawn from a ChaCha8
//! stream keyed by a 64-bit seed and a fixed stream id, so the same seed always
//! reproduces the same pool, diagonals and test vectors bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const POOL_STREAM: u64 = 1;
pub const ROTATION_STREAM: u64 = 2;
pub const PROJECTION_SIGN_STREAM: u64 = 3;
pub const VECTOR_STREAM: u64 = 4;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `index`-th trial of an experiment with the given base seed.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    base_seed.wrapping_add(index)
}
