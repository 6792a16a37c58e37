//! Deterministic seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a short tuple
//! of integers (phase, event id, arm index, UE id, ...). Streams never share
//! state, so rollouts can run in any order or in parallel and still produce
//! identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are arbitrary but frozen; changing one changes every
/// downstream result.
pub mod tag {
    pub const TRAIN_EVENT: u64 = 0x7472_6169_6e00;
    pub const EVAL_EVENT: u64 = 0x6576_616c_0000;
    pub const SCENARIO: u64 = 0x7363_656e_0000;
    pub const ROLLOUT: u64 = 0x726f_6c6c_0000;
    pub const AGENT: u64 = 0x6167_656e_7400;
    pub const RANDOM_POLICY: u64 = 0x7261_6e64_0000;
    pub const CHANNEL: u64 = 0x6368_616e_0000;
    pub const TRAFFIC: u64 = 0x7472_6166_0000;
    pub const TB: u64 = 0x7462_0000_0000;
    pub const MEASURE: u64 = 0x6d65_6173_0000;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed together with a path of integers.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// 64-bit FNV-1a, used for config and shape fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}
