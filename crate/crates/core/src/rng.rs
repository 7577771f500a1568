//! Deterministic seeding: every replication or resample gets its own
//! generator derived from (root seed, index), so serial and parallel runs
//! produce the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(root: u64, index: u64) -> u64 {
    mix(mix(root.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd605_bbb5_8c8a_bbf5))
}

pub fn stream(root: u64, index: u64) -> Rng {
    Rng::seed_from_u64(stream_seed(root, index))
}
