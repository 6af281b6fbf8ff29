//! Deterministic parallel randomness.
//!
//! Every replication draws from its own ChaCha stream derived from
//! `(seed, phase, rep)`, and results are collected in replication order,
//! so experiment output is a pure function of the config seed regardless
//! of worker count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// RNG for one unit of work. Phases partition the stream space so distinct
/// experiment stages never share a stream.
pub fn stream_rng(seed: u64, phase: u64, rep: u64) -> ChaCha8Rng {
    debug_assert!(rep < (1 << 40), "replication index exhausts stream space");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((phase << 40) | rep);
    rng
}

/// Runs `reps` independent replications in parallel and returns their
/// results indexed by replication.
pub fn parallel_map<T, F>(seed: u64, phase: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, phase, rep);
            f(rep, &mut rng)
        })
        .collect()
}
