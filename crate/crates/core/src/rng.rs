//! Counter-keyed random streams.
//!
//! Every `(seed, path, step)` triple names its own ChaCha8 stream, so results
//! never depend on the order in which paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per step inside a path stream.
const STEP_STRIDE_BITS: u32 = 32;

/// Stream for `(seed, path, step)`. Steps of one path are disjoint windows of
/// the same ChaCha stream; paths are distinct stream ids.
pub fn keyed_stream(seed: u64, path: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng.set_word_pos((step as u128) << STEP_STRIDE_BITS);
    rng
}

/// Stream for a whole path (step window 0, read sequentially).
pub fn path_stream(seed: u64, path: u64) -> ChaCha8Rng {
    keyed_stream(seed, path, 0)
}

/// Derives an independent sub-seed, e.g. for reference draws that must not
/// overlap sampler noise.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
