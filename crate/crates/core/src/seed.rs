//! Seed derivation.
//!
//! Every random stream in a run is keyed by a small tuple of integers mixed
//! through SplitMix64, so results do not depend on the order in which
//! streams are consumed or on how work is spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Partition = 1,
    ModelInit = 2,
    Scheduler = 3,
    Training = 4,
    TestSplit = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of integers into a single 64-bit seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    derive(&[trial_seed, stream as u64])
}

/// Per-client shuffle seed for the local update in a given round.
pub fn training_seed(trial_seed: u64, round: u64, client: usize) -> u64 {
    derive(&[trial_seed, Stream::Training as u64, round, client as u64])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
