//! Seed-splitting helpers for reproducible parallel sampling.
//!
//! Every stochastic operation takes an explicit RNG or seed. Parallel loops
//! derive one independent stream per task from `(master seed, task index)`,
//! so results do not depend on scheduling or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Mixes a parent seed and a task index into a child seed.
///
/// SplitMix64 finalizer; distinct (seed, index) pairs map to
/// well-separated child seeds.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(0x94d0_49bb_1331_11eb);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for a single task in a parallel loop.
pub fn task_rng(master_seed: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(child_seed(master_seed, index))
}

/// RNG seeded directly from a master seed (single-stream use).
pub fn master_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
