//! Exhaustive MAP decoding.
//!
//! With equiprobable information words and AWGN, the MAP decision is the
//! codeword whose BPSK image is nearest to `y` in Euclidean distance. Every
//! BPSK image has the same energy `N`, so the search maximises the correlation
//! `⟨y, s⟩` and only the winner's distance is computed explicitly.

use serde::{Deserialize, Serialize};

use crate::channel::{sigma_from_ebn0, RealVector};
use crate::codec::{BitVector, Codebook, PolarCode};
use crate::{sim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDecision {
    pub info_bits: BitVector,
    pub codeword_index: usize,
    /// Squared Euclidean distance from `y` to the chosen BPSK image.
    pub metric: f64,
}

/// Index of the nearest codeword; the smallest index wins ties.
pub fn nearest_codeword(y: &[f64], book: &Codebook) -> usize {
    let mut best = 0;
    let mut best_corr = f64::NEG_INFINITY;
    for i in 0..book.len() {
        let corr: f64 = y.iter().zip(book.symbols(i)).map(|(a, b)| a * b).sum();
        if corr > best_corr {
            best_corr = corr;
            best = i;
        }
    }
    best
}

pub fn map_decode(y: &RealVector, book: &Codebook) -> Result<MapDecision> {
    let n = book.code().n();
    if y.len() != n {
        return Err(Error::argument(format!(
            "received vector has length {}, code has N = {n}",
            y.len()
        )));
    }
    let idx = nearest_codeword(y.values(), book);
    let metric = squared_distance(y.values(), book.symbols(idx));
    Ok(MapDecision {
        info_bits: book.info_word(idx).clone(),
        codeword_index: idx,
        metric,
    })
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Monte-Carlo BER of MAP decoding at `ebn0_db`, counted over information
/// bits. Uses the evaluation stream of `seed`, so an NND evaluated with the
/// same seed sees the same words and noise.
pub fn map_ber(code: &PolarCode, ebn0_db: f64, num_samples: usize, seed: u64) -> Result<f64> {
    let book = Codebook::enumerate(code)?;
    map_ber_with_book(&book, ebn0_db, num_samples, seed)
}

pub fn map_ber_with_book(
    book: &Codebook,
    ebn0_db: f64,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::argument("num_samples must be at least 1"));
    }
    let code = book.code();
    let sigma = sigma_from_ebn0(ebn0_db, code.rate())?;
    let n = code.n();
    let errors = sim::total_bit_errors(book, None, sigma, num_samples, seed, |chunk| {
        chunk
            .words
            .iter()
            .zip(chunk.received.chunks_exact(n))
            .map(|(&sent, y)| {
                let decided = nearest_codeword(y, book);
                book.info_word(sent)
                    .hamming_distance(book.info_word(decided)) as u64
            })
            .sum()
    });
    Ok(errors as f64 / (code.k() * num_samples) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::bpsk_modulate;

    fn book(n: usize, k: usize) -> Codebook {
        Codebook::enumerate(&PolarCode::construct(n, k).unwrap()).unwrap()
    }

    #[test]
    fn noiseless_decodes_every_entry() {
        let book = book(8, 4);
        for i in 0..book.len() {
            let y = bpsk_modulate(book.codeword(i));
            let d = map_decode(&y, &book).unwrap();
            assert_eq!(d.codeword_index, i);
            assert_eq!(&d.info_bits, book.info_word(i));
            assert_eq!(d.metric, 0.0);
        }
    }

    #[test]
    fn repetition_code_example() {
        let book = book(2, 1);
        let d = map_decode(&RealVector::new(vec![0.1, 0.2]).unwrap(), &book).unwrap();
        assert_eq!(book.codeword(d.codeword_index).bits(), &[0, 0]);
        assert!((d.metric - 1.45).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let book = book(2, 1);
        for y in [vec![0.0, 0.0], vec![1.0, -1.0], vec![-0.3, 0.3]] {
            let d = map_decode(&RealVector::new(y).unwrap(), &book).unwrap();
            assert_eq!(d.codeword_index, 0);
        }
    }

    #[test]
    fn length_mismatch() {
        let book = book(8, 4);
        assert!(matches!(
            map_decode(&RealVector::new(vec![1.0; 4]).unwrap(), &book),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn ber_noiseless_and_deterministic() {
        let code = PolarCode::construct(8, 4).unwrap();
        assert_eq!(map_ber(&code, f64::INFINITY, 5000, 1).unwrap(), 0.0);
        let a = map_ber(&code, 1.0, 5000, 3).unwrap();
        let b = map_ber(&code, 1.0, 5000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert!(map_ber(&code, 1.0, 0, 3).is_err());
    }

    #[test]
    fn ber_near_half_at_vanishing_snr() {
        let code = PolarCode::construct(8, 4).unwrap();
        let ber = map_ber(&code, -40.0, 100_000, 5).unwrap();
        assert!((0.4..=0.6).contains(&ber), "ber = {ber}");
    }
}
