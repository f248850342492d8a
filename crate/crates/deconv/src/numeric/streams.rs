//! Deterministic RNG substream derivation.
//!
//! Parallel Monte Carlo work partitions trials into tasks; each task
//! seeds its own generator from `(master seed, task index)` through a
//! SplitMix64-style mixer. The streams a task sees therefore depend only
//! on the task index, never on worker count or scheduling, which is what
//! makes output byte-identical across thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of substream `index` of a master seed.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    mix(mix(master) ^ mix(index.wrapping_mul(0xA24B_AED4_963E_E407)))
}

/// ChaCha8 generator for substream `index` of a master seed.
pub fn substream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, index))
}
