use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::subset::TrainingSubset;
use crate::channel::sigma_from_ebn0;
use crate::codec::Codebook;
use crate::decoders::NetworkModel;
use crate::{sim, Error, Result};

/// Which information words a BER estimate draws from.
#[derive(Debug, Clone, Copy)]
pub enum Restrict<'a> {
    Full,
    Subset(&'a TrainingSubset),
}

fn bit_errors(
    model: &NetworkModel,
    book: &Codebook,
    sent: &[usize],
    received: ArrayView2<f32>,
) -> Result<u64> {
    let decided = model.decode_batch(received)?;
    Ok(sent
        .iter()
        .zip(decided.rows())
        .map(|(&idx, row)| {
            book.info_word(idx)
                .bits()
                .iter()
                .zip(row.iter())
                .filter(|(a, b)| a != b)
                .count() as u64
        })
        .sum())
}

/// Monte-Carlo BER of one-shot decoding at `ebn0_db` (`+∞` for noiseless),
/// over information bits. Uses the same evaluation streams as
/// [`crate::map_oracle::map_ber`], so both see identical words and noise for
/// equal seeds.
pub fn nnd_ber(
    model: &NetworkModel,
    book: &Codebook,
    ebn0_db: f64,
    num_samples: usize,
    seed: u64,
    restrict: Restrict<'_>,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::argument("num_samples must be at least 1"));
    }
    if model.spec.n != book.code().n() || model.spec.k != book.code().k() {
        return Err(Error::argument("model and code dimensions differ"));
    }
    let sigma = sigma_from_ebn0(ebn0_db, book.code().rate())?;
    let n = book.code().n();
    let pool = match restrict {
        Restrict::Full => None,
        Restrict::Subset(s) => Some(s.indices.as_slice()),
    };
    let errors = sim::total_bit_errors(book, pool, sigma, num_samples, seed, |chunk| {
        let rows = chunk.words.len();
        let y = Array2::from_shape_fn((rows, n), |(i, j)| chunk.received[i * n + j] as f32);
        bit_errors(model, book, &chunk.words, y.view()).expect("shapes checked above")
    });
    Ok(errors as f64 / (book.code().k() * num_samples) as f64)
}

/// Exact noiseless BER over the given codebook entries (all of them when
/// `indices` is `None`).
pub fn codebook_ber(
    model: &NetworkModel,
    book: &Codebook,
    indices: Option<&[usize]>,
) -> Result<f64> {
    let all: Vec<usize>;
    let indices = match indices {
        Some(i) => i,
        None => {
            all = (0..book.len()).collect();
            &all
        }
    };
    if indices.is_empty() {
        return Err(Error::argument("no codebook entries to evaluate"));
    }
    let n = book.code().n();
    let errors: Result<u64> = indices
        .par_chunks(sim::CHUNK)
        .map(|chunk| {
            let y =
                Array2::from_shape_fn((chunk.len(), n), |(i, j)| book.symbols(chunk[i])[j] as f32);
            bit_errors(model, book, chunk, y.view())
        })
        .sum();
    Ok(errors? as f64 / (book.code().k() * indices.len()) as f64)
}
