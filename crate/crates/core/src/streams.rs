//! Deterministic per-task random streams.
//!
//! Work that may run in parallel (trajectories, Φ cells) draws from a stream
//! derived from a base seed and the task index, so results do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(base: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

/// Batches with at least this many simulator steps are run on the rayon pool
/// when parallelism is enabled.
pub const PARALLEL_MIN_STEPS: usize = 2048;
