//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream whose seed is a
//! pure function of the user seed and a stream label, so results never depend
//! on scheduling or on how many draws another component made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `value` into `seed`.
#[inline]
pub fn mix(seed: u64, value: u64) -> u64 {
    splitmix64(seed ^ splitmix64(value))
}

/// Seed for a named sub-stream (e.g. `"baseline"`, `"peeling"`).
pub fn named(seed: u64, name: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(seed, h)
}

/// Folds a sequence of words into a seed.
pub fn fold<I: IntoIterator<Item = u64>>(seed: u64, words: I) -> u64 {
    words.into_iter().fold(splitmix64(seed), mix)
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn named_stream(seed: u64, name: &str) -> StreamRng {
    stream(named(seed, name))
}
