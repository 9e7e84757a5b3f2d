//! Seeded, counter-based random streams.
//!
//! Every sampled trial draws from its own ChaCha8 stream keyed by
//! `(seed, trial index)`, so results do not depend on how trials are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Independent stream for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream reserved for one named stage of an experiment. Stage streams live
/// in the upper half of the stream space so they never collide with trial
/// streams.
pub fn stage_rng(seed: u64, stage: u64) -> TrialRng {
    trial_rng(seed, (1u64 << 63) | stage)
}
