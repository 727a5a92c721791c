//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream identified by
//! `(root seed, domain, index)`. Results therefore depend only on the seed and
//! on how work is labelled, never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Distinct domains never share a ChaCha key.
pub mod domain {
    pub const CHANNEL: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SUBSET: u64 = 3;
    pub const TRAIN_POOL: u64 = 4;
    pub const TRAIN_SHUFFLE: u64 = 5;
    pub const DROPOUT: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const CELL: u64 = 8;
    pub const VALIDATION: u64 = 9;
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(mix64(seed) ^ label.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Opens stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}
