//! Deterministic randomness contract.
//!
//! Every source of randomness in the crate draws from a named stream
//! derived from a root seed, a replicate index, and a list of labels
//! (stream kind, node id, ...). The same root seed and labels always yield
//! the same generator, so mobility, sensing noise and adversary decisions
//! are independently reproducible and replicate runs can execute in any
//! order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root seed plus replicate stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }
}

/// Named stream kinds; keeps label spaces of different subsystems disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Placement = 1,
    RoleAssignment = 2,
    Mobility = 3,
    SybilTrack = 4,
    AdNoise = 5,
    VdNoise = 6,
    RssiNoise = 7,
}

/// Derives a child root seed (e.g. one per sweep cell) from a parent seed
/// and an index, using the same mixing chain as the stream derivation.
pub fn derive_seed(root: u64, label: u64) -> u64 {
    splitmix64(splitmix64(root ^ 0x9fb2_1c65_1e98_df25) ^ label)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a generator for a named stream. Labels are folded into the seed
/// with a splitmix chain, so distinct label tuples give independent streams.
pub fn stream_rng(seed: RngSeed, kind: StreamKind, labels: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed.seed ^ 0x5bf0_3635_d1a4_49c1);
    state = splitmix64(state ^ seed.stream);
    state = splitmix64(state ^ kind as u64);
    for &label in labels {
        state = splitmix64(state ^ label);
    }
    ChaCha8Rng::seed_from_u64(state)
}
