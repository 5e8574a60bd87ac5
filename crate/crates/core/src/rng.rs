//! The one seeded generator used throughout the crate.
//!
//! Every consumer derives its own ChaCha8 stream from the session seed, so
//! adding draws in one place never shifts the sequence seen by another and
//! no generator state has to be persisted between rounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub const STREAM_SPLIT: u64 = 0;
pub const STREAM_SEED: u64 = 1;
pub const STREAM_SYNTHETIC: u64 = 2;
/// Query round `r` draws from stream `STREAM_QUERY_BASE + r`.
pub const STREAM_QUERY_BASE: u64 = 1_000;

pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Partial Fisher-Yates: after the call the first `k` slots hold a uniform
/// sample without replacement, in selection order.
pub fn partial_shuffle<T>(items: &mut [T], k: usize, rng: &mut SeededRng) {
    let n = items.len();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}
