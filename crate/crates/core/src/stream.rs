//! Seeded substreams for chunked, parallel Monte Carlo.
//!
//! Trials are cut into chunks of [`CHUNK`]. Chunk `k` of a run draws from
//! ChaCha8 seeded with the run seed, on stream
//! `(tag << 40) | (k << 4) | purpose`. Results depend only on the seed and
//! the trial count, never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: u64 = 1 << 16;

/// Independent uses of randomness inside one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Sample = 0,
    LeftDetection = 1,
    RightDetection = 2,
}

pub fn substream(seed: u64, tag: u64, chunk: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 40) | (chunk << 4) | purpose as u64);
    rng
}

/// `(chunk index, trials in chunk)` for `total` trials.
pub fn chunks(total: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let n = total.div_ceil(CHUNK);
    (0..n as usize).into_par_iter().map(move |k| {
        let k = k as u64;
        (k, CHUNK.min(total - k * CHUNK))
    })
}
