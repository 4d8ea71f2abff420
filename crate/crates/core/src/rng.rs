//! Counter-based randomness.
//!
//! Everything random in a run is a pure function of the run seed plus a
//! label or coordinates, so partitions never need to share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one, each step fully avalanched.
#[inline]
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(w.wrapping_add(GOLDEN)));
    }
    h
}

/// Derives a subsystem seed from the run seed and a tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then mixed with the seed
    let mut t: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        t ^= u64::from(b);
        t = t.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash_words(&[seed, t])
}

/// Generator for a labeled stream, e.g. `(seed, round, row)`.
pub fn stream(seed: u64, round: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_words(&[seed, round, index]))
}

/// Maps the top 53 bits to `[0, 1)`.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
