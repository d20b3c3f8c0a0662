//! Named random sub-streams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tree::fnv1a64;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed, a stream label and stream indices into one 64-bit seed.
pub fn derive_seed(root: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ fnv1a64(label.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(root: u64, label: &str, indices: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, indices))
}
