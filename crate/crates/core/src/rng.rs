//! Seed derivation and per-column random streams.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed.
//! Columns of a sample matrix draw from their own ChaCha stream
//! `(seed, column)`, so growing `N` never reshuffles earlier columns and
//! columns can be generated in any order (or in parallel).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |acc, &t| {
        mix64(acc ^ mix64(t.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Generator for column `column` of the sample matrix seeded by `seed`.
pub fn column_rng(seed: u64, column: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng
}

/// Single generator for `seed` (stream 0 of a derived key).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed))
}
