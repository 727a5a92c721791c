//! Polar code construction, encoding and codebook enumeration.
//!
//! Codes use the natural-order generator `F^{⊗n}` with `F = [[1,0],[1,1]]`
//! (no bit-reversal permutation) and the row-vector convention `c = u·G`.
//! Information positions are chosen by the Bhattacharyya recursion at erasure
//! probability 0.5; frozen positions carry 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest K for which [`Codebook::enumerate`] will materialise `2^K` words.
pub const MAX_ENUMERABLE_K: usize = 24;

/// A fixed-length vector of bits.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BitVector(Vec<u8>);

impl BitVector {
    /// Builds a bit vector, rejecting empty input and entries other than 0/1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::argument("bit vector must be non-empty"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::argument(format!("bit value {b} is not 0 or 1")));
        }
        Ok(BitVector(bits))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "bit vector must be non-empty");
        BitVector(vec![0; len])
    }

    /// The `len`-bit binary expansion of `value`, most significant bit first.
    pub fn from_index(value: u64, len: usize) -> Self {
        assert!(len > 0 && len <= 64);
        BitVector(
            (0..len)
                .map(|i| ((value >> (len - 1 - i)) & 1) as u8)
                .collect(),
        )
    }

    /// Inverse of [`BitVector::from_index`].
    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// Bitwise mod-2 sum.
    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len() != other.len() {
            return Err(Error::argument(format!(
                "length mismatch in xor: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(BitVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming_distance(&self, other: &BitVector) -> usize {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }
}

impl TryFrom<Vec<u8>> for BitVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        BitVector::new(bits)
    }
}

impl From<BitVector> for Vec<u8> {
    fn from(v: BitVector) -> Self {
        v.0
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// A polar code `(N, K)` with its information set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarCode {
    n: usize,
    k: usize,
    info_positions: Vec<usize>,
}

impl PolarCode {
    /// Constructs the `(n, k)` code whose information positions are the `k`
    /// indices with the smallest Bhattacharyya parameter. Ties go to the
    /// higher index.
    pub fn construct(n: usize, k: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "block length {n} is not a power of two >= 2"
            )));
        }
        if k == 0 || k > n {
            return Err(Error::config(format!("info length {k} outside 1..={n}")));
        }
        let z = bhattacharyya_parameters(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a)));
        let mut info_positions = order[..k].to_vec();
        info_positions.sort_unstable();
        Ok(PolarCode {
            n,
            k,
            info_positions,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Sorted information positions (0-based).
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn frozen_positions(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|i| self.info_positions.binary_search(i).is_err())
            .collect()
    }

    /// Places `x` on the information positions and zeros elsewhere.
    pub fn generator_input(&self, x: &BitVector) -> Result<BitVector> {
        if x.len() != self.k {
            return Err(Error::argument(format!(
                "information word has length {}, code expects K = {}",
                x.len(),
                self.k
            )));
        }
        let mut u = vec![0u8; self.n];
        for (&pos, &bit) in self.info_positions.iter().zip(x.bits()) {
            u[pos] = bit;
        }
        Ok(BitVector(u))
    }

    /// Encodes a length-K information word into a length-N codeword.
    pub fn encode(&self, x: &BitVector) -> Result<BitVector> {
        let mut u = self.generator_input(x)?.0;
        polar_transform(&mut u);
        Ok(BitVector(u))
    }
}

/// In-place `u ← u·F^{⊗n}` over GF(2), natural index order.
fn polar_transform(u: &mut [u8]) {
    let n = u.len();
    let mut half = 1;
    while half < n {
        for block in u.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// Bhattacharyya parameters of the `n` synthetic channels, starting from
/// `Z = 0.5` and expanding each index `i` into `2i ← 2Z − Z²`, `2i+1 ← Z²`.
pub fn bhattacharyya_parameters(n: usize) -> Vec<f64> {
    let mut z = vec![0.5];
    while z.len() < n {
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    z
}

/// All `2^K` (information word, codeword) pairs, indexed by the information
/// word read as a big-endian integer.
#[derive(Debug, Clone)]
pub struct Codebook {
    code: PolarCode,
    info_words: Vec<BitVector>,
    codewords: Vec<BitVector>,
    // BPSK images of the codewords, row-major [2^K × N].
    symbols: Vec<f64>,
}

impl Codebook {
    pub fn enumerate(code: &PolarCode) -> Result<Self> {
        if code.k > MAX_ENUMERABLE_K {
            return Err(Error::Resource(format!(
                "cannot enumerate 2^{} codewords (limit K <= {MAX_ENUMERABLE_K})",
                code.k
            )));
        }
        let size = 1usize << code.k;
        let mut info_words = Vec::with_capacity(size);
        let mut codewords = Vec::with_capacity(size);
        let mut symbols = Vec::with_capacity(size * code.n);
        for i in 0..size {
            let x = BitVector::from_index(i as u64, code.k);
            let c = code.encode(&x)?;
            symbols.extend(c.bits().iter().map(|&b| crate::channel::bpsk_symbol(b)));
            info_words.push(x);
            codewords.push(c);
        }
        Ok(Codebook {
            code: code.clone(),
            info_words,
            codewords,
            symbols,
        })
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn info_word(&self, i: usize) -> &BitVector {
        &self.info_words[i]
    }

    pub fn codeword(&self, i: usize) -> &BitVector {
        &self.codewords[i]
    }

    /// BPSK image of codeword `i`.
    pub fn symbols(&self, i: usize) -> &[f64] {
        let n = self.code.n;
        &self.symbols[i * n..(i + 1) * n]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&BitVector, &BitVector)> {
        self.info_words.iter().zip(&self.codewords)
    }
}
