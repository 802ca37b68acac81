//! Seed derivation. Every random stream in a benchmark is keyed by its role
//! and position, so adding a policy or reordering work never shifts another
//! stream.

pub const INSTANCE_STREAM: u64 = 1;
pub const ARRIVAL_STREAM: u64 = 2;
pub const CHOICE_STREAM: u64 = 3;
pub const POLICY_STREAM: u64 = 4;
pub const SEARCH_STREAM: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `base` one component at a time.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn instance_seed(base: u64, instance: usize) -> u64 {
    derive_seed(base, &[INSTANCE_STREAM, instance as u64])
}

pub fn arrival_seed(base: u64, instance: usize, sequence: usize) -> u64 {
    derive_seed(base, &[ARRIVAL_STREAM, instance as u64, sequence as u64])
}

pub fn choice_seed(base: u64, instance: usize, sequence: usize, sim: usize) -> u64 {
    derive_seed(base, &[CHOICE_STREAM, instance as u64, sequence as u64, sim as u64])
}
