//! Chunked Monte-Carlo transmission shared by the MAP and NND BER estimators.
//!
//! Samples are generated in fixed-size chunks; chunk `c` draws from stream `c`
//! of the evaluation domain. Error counts are integers, so the total is the
//! same for any number of worker threads.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::add_noise;
use crate::codec::Codebook;
use crate::rng;

pub(crate) const CHUNK: usize = 1024;

/// One chunk of transmitted words.
pub(crate) struct Chunk {
    /// Codebook index of each transmitted word.
    pub words: Vec<usize>,
    /// Received vectors, row-major `[words.len() × N]`.
    pub received: Vec<f64>,
}

/// Draws `count` words uniformly from `pool` (or from the whole codebook when
/// `pool` is `None`) and passes them through the channel.
pub(crate) fn draw_chunk<R: Rng>(
    book: &Codebook,
    pool: Option<&[usize]>,
    sigma: f64,
    count: usize,
    rng: &mut R,
) -> Chunk {
    let n = book.code().n();
    let mut words = Vec::with_capacity(count);
    let mut received = Vec::with_capacity(count * n);
    for _ in 0..count {
        let idx = match pool {
            Some(p) => p[rng.random_range(0..p.len())],
            None => rng.random_range(0..book.len()),
        };
        let start = received.len();
        received.extend_from_slice(book.symbols(idx));
        add_noise(&mut received[start..], sigma, rng);
        words.push(idx);
    }
    Chunk { words, received }
}

/// Runs `num_samples` transmissions and sums the information-bit errors that
/// `count_errors` reports for each chunk.
pub(crate) fn total_bit_errors<F>(
    book: &Codebook,
    pool: Option<&[usize]>,
    sigma: f64,
    num_samples: usize,
    seed: u64,
    count_errors: F,
) -> u64
where
    F: Fn(&Chunk) -> u64 + Sync,
{
    let chunks = num_samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(num_samples - c * CHUNK);
            let mut rng = rng::stream(seed, rng::domain::EVAL, c as u64);
            let chunk = draw_chunk(book, pool, sigma, count, &mut rng);
            count_errors(&chunk)
        })
        .sum()
}
