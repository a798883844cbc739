//! Reproducible, chunked random streams.
//!
//! Work is split into fixed-size chunks; chunk `i` draws from ChaCha stream
//! `i` of the root seed. Results therefore depend on the seed and chunk size
//! but never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default number of draws per chunk.
pub const CHUNK: usize = 4096;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `f(rng, chunk_index, chunk_len)` over `total` items split into chunks
/// of `chunk` and collect the per-chunk results in chunk order.
pub fn chunked<T, F>(total: usize, chunk: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk.min(total - c * chunk);
            let mut rng = stream_rng(seed, c as u64);
            f(&mut rng, c, len)
        })
        .collect()
}

/// A seed for replicate `i` of an experiment rooted at `seed`.
pub fn replicate_seed(seed: u64, i: u64) -> u64 {
    use rand::RngCore;
    // stream 2^40 + i keeps replicate seeds disjoint from chunk streams
    stream_rng(seed, (1u64 << 40) + i).next_u64()
}
