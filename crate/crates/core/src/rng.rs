//! Reproducible random streams.
//!
//! All Monte Carlo in the crate draws from ChaCha20 keyed by the user seed,
//! with one independent stream per batch of draws. Batch results are
//! reduced in batch order, so outputs depend only on `(inputs, seed,
//! sample count)` and never on how batches are scheduled over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Draws per stream.
pub const BATCH: usize = 4096;

/// Generator for batch `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(start, len)` of every batch covering `n` draws.
pub fn batches(n: usize) -> impl Iterator<Item = (u64, usize, usize)> {
    (0..n.div_ceil(BATCH)).map(move |b| {
        let start = b * BATCH;
        (b as u64, start, BATCH.min(n - start))
    })
}
