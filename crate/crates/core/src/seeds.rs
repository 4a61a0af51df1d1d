//! Independent sub-seeds from one run seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First output of ChaCha stream `stream` keyed by `seed`. Distinct streams
/// give statistically independent seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}
