//! Seeded, derivable random streams.
//!
//! Every consumer draws from its own stream, derived from the run seed, a
//! stream label and an index, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Independent generator for `(seed, label, index)`.
pub fn derive(seed: u64, label: &str, index: u64) -> Rng {
    let s = splitmix64(splitmix64(seed ^ label_hash(label)) ^ splitmix64(index.wrapping_add(1)));
    ChaCha8Rng::seed_from_u64(s)
}

/// Derive a child seed, for passing to components that take plain seeds.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ label_hash(label)) ^ splitmix64(index.wrapping_add(1)))
}
