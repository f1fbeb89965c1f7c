//! Seed derivation for independent random streams.
//!
//! Every stochastic component (IB initialization, node sampling, splits,
//! experiment runs) draws from its own ChaCha stream whose seed is a hash of
//! the master seed and a path of integers, e.g. `(seed, TRAIN_SAMPLE, layer,
//! position)`. Adding a node or a run never shifts another stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub(crate) const TAG_IB_INIT: u64 = 1;
pub(crate) const TAG_TRAIN_SAMPLE: u64 = 2;
pub(crate) const TAG_PREDICT: u64 = 3;
pub(crate) const TAG_SPLIT: u64 = 4;
pub(crate) const TAG_RUN: u64 = 5;
pub(crate) const TAG_EVAL_TRAIN: u64 = 6;
pub(crate) const TAG_EVAL_TEST: u64 = 7;
pub(crate) const TAG_MI_FLOW: u64 = 8;
pub(crate) const TAG_TRAIN: u64 = 9;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed and a path of stream identifiers into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}
