//! Deterministic RNG stream derivation.
//!
//! Every random decision in this crate flows from a single master seed.
//! Consumers derive independent streams from `(master, purpose tag, index)`,
//! so adding, removing, or reordering one consumer never perturbs the draws
//! of another. Streams are ChaCha8, which is stable across platforms.

use rand_chacha::ChaCha8Rng;

use rand::SeedableRng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes. Used for tag mixing here and feature hashing in
/// the span model; must stay byte-stable.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the stream for `(master, tag, index)`.
pub fn stream(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    stream2(master, tag, index, 0)
}

/// Two-index variant for nested loops such as `(epoch, sentence)`.
pub fn stream2(master: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    let mut s = splitmix64(master ^ fnv1a64(tag.as_bytes()));
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    ChaCha8Rng::seed_from_u64(s)
}
