use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, NoiseSpec};
use crate::codec::Codebook;
use crate::{rng, Error, Result};

/// The codebook indices training words are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSubset {
    pub indices: Vec<usize>,
    pub fraction: f64,
}

impl TrainingSubset {
    pub fn full(book: &Codebook) -> Self {
        TrainingSubset {
            indices: (0..book.len()).collect(),
            fraction: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Subset size `max(1, round(p · 2^K))`, rounding halves up.
pub fn subset_size(p: f64, codebook_len: usize) -> usize {
    ((p * codebook_len as f64 + 0.5).floor() as usize).clamp(1, codebook_len)
}

/// Picks `max(1, round(p · 2^K))` codebook indices uniformly without
/// replacement. The choice depends only on `(seed, p, K)`.
pub fn make_training_subset(book: &Codebook, p: f64, seed: u64) -> Result<TrainingSubset> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::argument(format!(
            "training fraction {p} outside (0, 1]"
        )));
    }
    let total = book.len();
    let size = subset_size(p, total);
    let mut r = rng::stream(
        seed,
        rng::domain::SUBSET,
        p.to_bits() ^ (book.code().k() as u64).rotate_left(56),
    );
    let mut indices = index::sample(&mut r, total, size).into_vec();
    indices.sort_unstable();
    Ok(TrainingSubset {
        indices,
        fraction: p,
    })
}

/// Draws one training pair into the given rows: a word uniform over the
/// subset, its BPSK image through the channel, and the raw information bits.
pub(crate) fn draw_sample<R: Rng + ?Sized>(
    subset: &TrainingSubset,
    book: &Codebook,
    sigma: f64,
    rng: &mut R,
    input: &mut [f32],
    target: &mut [f32],
    scratch: &mut Vec<f64>,
) {
    let idx = subset.indices[rng.random_range(0..subset.len())];
    scratch.clear();
    scratch.extend_from_slice(book.symbols(idx));
    add_noise(scratch, sigma, rng);
    for (dst, &v) in input.iter_mut().zip(scratch.iter()) {
        *dst = v as f32;
    }
    for (dst, &b) in target.iter_mut().zip(book.info_word(idx).bits()) {
        *dst = f32::from(b);
    }
}

/// A fresh batch of `(received [batch × N], bits [batch × K])`.
pub fn sample_batch<R: Rng + ?Sized>(
    subset: &TrainingSubset,
    book: &Codebook,
    spec: &NoiseSpec,
    batch_size: usize,
    rng: &mut R,
) -> (Array2<f32>, Array2<f32>) {
    let (n, k) = (book.code().n(), book.code().k());
    let mut inputs = Array2::zeros((batch_size, n));
    let mut targets = Array2::zeros((batch_size, k));
    let mut scratch = Vec::with_capacity(n);
    for (mut x, mut t) in inputs.rows_mut().into_iter().zip(targets.rows_mut()) {
        draw_sample(
            subset,
            book,
            spec.sigma(),
            rng,
            x.as_slice_mut().unwrap(),
            t.as_slice_mut().unwrap(),
            &mut scratch,
        );
    }
    (inputs, targets)
}
