//! Per-run seed derivation.
//!
//! `run_seed(base, index)` mixes the base seed and the run index through two
//! SplitMix64 rounds. Every replication owns the stream seeded by its own
//! index, so extending a sweep leaves existing runs untouched.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `index` of a run family rooted at `base`.
pub fn run_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base.wrapping_add(GOLDEN_GAMMA)).wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Seed for replication `index` within named sub-family `family` (e.g. one
/// per agent mode).
pub fn run_seed_in(base: u64, family: u64, index: u64) -> u64 {
    run_seed(run_seed(base, family), index)
}
