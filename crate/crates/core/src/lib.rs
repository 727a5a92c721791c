//! One-shot neural network decoders (MLP, CNN, LSTM) for short polar codes
//! over a BPSK/AWGN channel, benchmarked against exhaustive MAP decoding.
//!
//! The crate is organised bottom-up:
//!
//! - [`codec`]: polar code construction, encoding and codebook enumeration.
//! - [`channel`]: BPSK mapping, AWGN noise and Eb/N0 conversions.
//! - [`map_oracle`]: minimum-distance (MAP) decoding over the full codebook.
//! - [`neuralnet`]: a small from-scratch network kernel with manual backprop.
//! - [`decoders`]: the three decoder architectures and parameter counting.
//! - [`harness`]: training, BER evaluation, training-SNR selection, timing and
//!   the experiment runner behind the `nnd-bench` CLI.

pub mod channel;
pub mod codec;
pub mod decoders;
mod error;
pub mod harness;
pub mod map_oracle;
pub mod neuralnet;
pub mod rng;
mod sim;

pub use channel::{NoiseSpec, RealVector};
pub use codec::{BitVector, Codebook, PolarCode};
pub use decoders::{ArchKind, ArchitectureSpec, NetworkModel, ParamCount};
pub use error::{Error, Result};
pub use map_oracle::MapDecision;
