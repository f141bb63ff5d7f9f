//! Counter-based seed derivation.
//!
//! Every randomized step of the pipeline gets its own seed, derived from the
//! master seed and a path of integer tags (fold, estimator, grid point, ...).
//! Derived seeds do not depend on execution order, so parallel and serial
//! runs draw identical random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a tag path.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed.wrapping_add(GOLDEN)), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(GOLDEN).wrapping_mul(GOLDEN)))
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
