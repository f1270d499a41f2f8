//! Named, reproducible random streams.
//!
//! Every consumer of randomness (initialization, anonymization, shuffling,
//! negative sampling, synthetic data) draws from its own stream derived from
//! the run seed, a purpose label and an index, so adding draws in one place
//! never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INIT: &str = "init";
pub const ANONYMIZATION: &str = "anonymization";
pub const EVAL_ANONYMIZATION: &str = "anonymization-eval";
pub const SHUFFLING: &str = "shuffling";
pub const NEGATIVES: &str = "negatives";
pub const ORDER: &str = "order";
pub const RANKER_ORDER: &str = "ranker-order";
pub const SELECTION: &str = "selection";
pub const SYNTH: &str = "synth";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    splitmix(splitmix(seed ^ fnv1a(purpose.as_bytes())) ^ index)
}

pub fn stream(seed: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(stream_seed(seed, purpose, index))
}
