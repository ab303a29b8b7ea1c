//! Counter-based random streams.
//!
//! Replication `i` of a run seeded with `global_seed` draws from
//! `ChaCha8Rng::seed_from_u64(mix(global_seed, i))`, so every path can be
//! regenerated in isolation and results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer applied to `global_seed + (index + 1)·γ`, with γ
/// the 64-bit golden-ratio increment.
pub fn mix(global_seed: u64, index: u64) -> u64 {
    let mut z = global_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stream for replication `index`, together with its seed tag.
pub fn stream(global_seed: u64, index: u64) -> (Stream, u64) {
    let tag = mix(global_seed, index);
    (ChaCha8Rng::seed_from_u64(tag), tag)
}
