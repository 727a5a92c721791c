//! BPSK modulation over an AWGN channel.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::BitVector;
use crate::{Error, Result};

/// A vector of finite reals: BPSK symbols, noise, or a received word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument("real vector must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("real vector entries must be finite"));
        }
        Ok(RealVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hard decision at 0: negative → 1, otherwise 0.
    pub fn hard_decision(&self) -> BitVector {
        BitVector::new(self.0.iter().map(|&v| u8::from(v < 0.0)).collect())
            .expect("non-empty by construction")
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        RealVector::new(values)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

/// Channel noise for one operating point. `sigma == 0` is the noiseless channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    ebn0_db: f64,
    rate: f64,
    sigma: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(ebn0_db: f64, rate: f64, seed: u64) -> Result<Self> {
        let sigma = sigma_from_ebn0(ebn0_db, rate)?;
        Ok(NoiseSpec {
            ebn0_db,
            rate,
            sigma,
            seed,
        })
    }

    /// The noiseless channel (`Eb/N0 = +∞`).
    pub fn noiseless(rate: f64, seed: u64) -> Result<Self> {
        Self::new(f64::INFINITY, rate, seed)
    }

    /// `Some(dB)` for a noisy channel, `None` for the noiseless one.
    pub fn from_option(ebn0_db: Option<f64>, rate: f64, seed: u64) -> Result<Self> {
        Self::new(ebn0_db.unwrap_or(f64::INFINITY), rate, seed)
    }

    pub fn ebn0_db(&self) -> f64 {
        self.ebn0_db
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Noise standard deviation for a given Eb/N0 (dB) and code rate:
/// `σ² = 1 / (2 R 10^(Eb/N0 / 10))`.
pub fn sigma_from_ebn0(ebn0_db: f64, rate: f64) -> Result<f64> {
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::argument(format!(
            "code rate must be positive, got {rate}"
        )));
    }
    if ebn0_db.is_nan() {
        return Err(Error::argument("Eb/N0 is NaN"));
    }
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    Ok((1.0 / (2.0 * rate * ebn0)).sqrt())
}

#[inline]
pub fn bpsk_symbol(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Bit 0 ↦ +1, bit 1 ↦ −1.
pub fn bpsk_modulate(u: &BitVector) -> RealVector {
    RealVector(u.bits().iter().map(|&b| bpsk_symbol(b)).collect())
}

/// `y = s + n` with `n ~ N(0, σ² I)`.
pub fn transmit<R: Rng + ?Sized>(s: &RealVector, spec: &NoiseSpec, rng: &mut R) -> RealVector {
    let mut y = s.0.clone();
    add_noise(&mut y, spec.sigma, rng);
    RealVector(y)
}

/// Adds i.i.d. Gaussian noise in place. Draws nothing when `sigma == 0`.
pub fn add_noise<R: Rng + ?Sized>(y: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    for v in y {
        let n: f64 = rng.sample(StandardNormal);
        *v += sigma * n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn bpsk_examples() {
        let m = |b: Vec<u8>| bpsk_modulate(&BitVector::new(b).unwrap()).0;
        assert_eq!(m(vec![0, 0, 0, 0]), vec![1.0; 4]);
        assert_eq!(m(vec![0, 1]), vec![1.0, -1.0]);
        assert_eq!(m(vec![1, 1, 0]), vec![-1.0, -1.0, 1.0]);
    }

    #[test]
    fn hard_decision_inverts_bpsk() {
        for i in 0..256 {
            let u = BitVector::from_index(i, 8);
            assert_eq!(bpsk_modulate(&u).hard_decision(), u);
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_from_ebn0(0.0, 0.5).unwrap(), 1.0);
        assert!((sigma_from_ebn0(10.0, 0.5).unwrap() - 0.1f64.sqrt()).abs() < 1e-12);
        assert!(sigma_from_ebn0(80.0, 0.5).unwrap() < 1e-3);
        assert_eq!(sigma_from_ebn0(f64::INFINITY, 0.5).unwrap(), 0.0);
        assert!(matches!(sigma_from_ebn0(0.0, 0.0), Err(Error::Argument(_))));
        assert!(matches!(
            sigma_from_ebn0(0.0, -1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn sigma_is_strictly_decreasing() {
        let grid: Vec<f64> = (-40..=40).map(|d| d as f64 * 0.5).collect();
        for w in grid.windows(2) {
            assert!(sigma_from_ebn0(w[0], 0.5).unwrap() > sigma_from_ebn0(w[1], 0.5).unwrap());
        }
    }

    #[test]
    fn noise_spec_holds_sigma() {
        let spec = NoiseSpec::new(3.0, 0.5, 1).unwrap();
        let expected = 1.0 / (2.0 * 0.5 * 10f64.powf(0.3));
        assert!((spec.sigma() * spec.sigma() - expected).abs() < 1e-15);
        assert!(NoiseSpec::noiseless(0.5, 1).unwrap().is_noiseless());
    }

    #[test]
    fn noiseless_transmit_is_identity() {
        let s = RealVector::new(vec![1.0, -1.0, 1.0]).unwrap();
        let spec = NoiseSpec::noiseless(0.5, 0).unwrap();
        assert_eq!(
            transmit(&s, &spec, &mut rng::stream(0, rng::domain::CHANNEL, 0)),
            s
        );
    }

    #[test]
    fn transmit_is_deterministic() {
        let s = RealVector::new(vec![1.0; 16]).unwrap();
        let spec = NoiseSpec::new(1.0, 0.5, 9).unwrap();
        let a = transmit(&s, &spec, &mut rng::stream(9, rng::domain::CHANNEL, 0));
        let b = transmit(&s, &spec, &mut rng::stream(9, rng::domain::CHANNEL, 0));
        assert_eq!(a, b);
        assert_ne!(a, s);
    }

    #[test]
    fn real_vector_rejects_non_finite() {
        assert!(RealVector::new(vec![f64::NAN]).is_err());
        assert!(RealVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(RealVector::new(vec![]).is_err());
    }
}
