//! Named random streams derived from a run seed.
//!
//! Every run owns independent ChaCha8 streams keyed by [`Stream`], so two
//! learners run under the same seed face identical contexts and adversary
//! noise while their own randomness stays separate.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Rollout = 1,
    Action = 2,
    Estimator = 3,
    Contexts = 4,
    Adversary = 5,
    Verifier = 6,
    /// Rollouts behind the distribution an adaptive adversary is shown.
    AdversaryView = 7,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// `count` run seeds derived from a master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Independent substream `index` of `seed`, used to split Monte-Carlo batches.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1_000 + index);
    rng
}
