//! Deterministic seed derivation so every random stream flows from one seed.

use crate::encoders::fnv1a64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent child seed for the stream named `tag`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(tag.as_bytes())))
}
