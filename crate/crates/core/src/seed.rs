//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! value obtained by splitmix-style mixing of a master seed with a tuple of
//! tags (setting index, batch index, replicate index, ...). Streams therefore
//! do not depend on evaluation order or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with each tag in turn.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().enumerate().fold(splitmix64(seed), |acc, (pos, &tag)| {
        let salted = splitmix64(tag ^ (pos as u64 + 1).wrapping_mul(GOLDEN_GAMMA));
        splitmix64(acc ^ salted)
    })
}

pub fn rng_from(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}
