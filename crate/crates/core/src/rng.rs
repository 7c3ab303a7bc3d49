//! Deterministic RNG stream derivation.
//!
//! Every stochastic component receives its own stream derived from a master
//! seed and a path of integer labels (replication index, round, trial, ...).
//! Streams are pure functions of `(master_seed, path)`, so results do not
//! depend on scheduling order when trials run in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type SspRng = ChaCha8Rng;

/// SplitMix64 step; used to mix path labels into seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Builds the RNG for a path of labels under a master seed.
pub fn stream(master_seed: u64, path: &[u64]) -> SspRng {
    let mut seed = splitmix64(master_seed);
    for &label in path {
        seed = derive_seed(seed, label);
    }
    SspRng::seed_from_u64(seed)
}

/// Derives an independent child RNG from a parent RNG position.
///
/// The parent is advanced (one draw), so successive calls with the same
/// label yield different children.
pub fn child(parent: &mut SspRng, label: u64) -> SspRng {
    use rand::Rng;
    let base: u64 = parent.random();
    SspRng::seed_from_u64(derive_seed(base, label))
}
