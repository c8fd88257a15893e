//! Seeded random streams.
//!
//! Every stochastic routine draws from [`JobRng`] (ChaCha8 from `rand_chacha`
//! 0.10). A job seed `s` maps to the generator `ChaCha8Rng::seed_from_u64(s)`;
//! work item `k` of that job (a Monte Carlo chunk, a sampling batch) uses the
//! same key with the ChaCha stream id set to `k`. Streams never overlap, and
//! the mapping from (seed, k) to random numbers does not depend on how many
//! worker threads execute the items.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type JobRng = ChaCha8Rng;

/// Name and version echoed into reports.
pub const GENERATOR_NAME: &str = "rand_chacha::ChaCha8Rng 0.10 (seed_from_u64, stream = work item)";

/// Generator for work item `stream` of the job seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> JobRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
