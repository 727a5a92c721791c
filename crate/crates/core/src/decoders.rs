//! The three one-shot decoder architectures.
//!
//! - MLP: dense `N → 64 → 32 → 16 → K`, ReLU hidden units, dropout after each
//!   hidden layer, sigmoid output.
//! - CNN: three `conv(3, same) → ReLU → maxpool(2) → dropout` stages with
//!   8/16/32 channels, then a `conv(N/8, valid)` down to `K × 1`, sigmoid.
//! - RNN: one LSTM cell (hidden 256) fed one received symbol per time step,
//!   dropout on the final hidden state, dense readout `256 → K`, sigmoid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::RealVector;
use crate::codec::BitVector;
use crate::neuralnet::{Conv1d, Dense, Dropout, Layer, Lstm, MaxPool1d, Network, Real};
use crate::{Error, Result};

/// Version written into serialized model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Mlp,
    Cnn,
    Rnn,
}

impl ArchKind {
    pub const ALL: [ArchKind; 3] = [ArchKind::Mlp, ArchKind::Cnn, ArchKind::Rnn];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::Mlp => "mlp",
            ArchKind::Cnn => "cnn",
            ArchKind::Rnn => "rnn",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ArchKind::Mlp),
            "cnn" => Ok(ArchKind::Cnn),
            "rnn" | "lstm" => Ok(ArchKind::Rnn),
            other => Err(Error::config(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    pub n: usize,
    pub k: usize,
    pub mlp_hidden: Vec<usize>,
    pub cnn_channels: Vec<usize>,
    pub rnn_hidden: usize,
    pub dropout: f64,
}

impl ArchitectureSpec {
    /// Default widths: MLP `[64, 32, 16]`, CNN `[8, 16, 32]`, LSTM 256,
    /// dropout 0.1.
    pub fn new(kind: ArchKind, n: usize, k: usize) -> Self {
        ArchitectureSpec {
            kind,
            n,
            k,
            mlp_hidden: vec![64, 32, 16],
            cnn_channels: vec![8, 16, 32],
            rnn_hidden: 256,
            dropout: 0.1,
        }
    }

    /// Rate-1/2 default: `K = N / 2`.
    pub fn half_rate(kind: ArchKind, n: usize) -> Self {
        Self::new(kind, n, n / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::config(format!(
                "need 1 <= K <= N, got N = {}, K = {}",
                self.n, self.k
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout probability {} outside [0, 1)",
                self.dropout
            )));
        }
        match self.kind {
            ArchKind::Mlp if self.mlp_hidden.contains(&0) => {
                Err(Error::config("MLP hidden widths must be positive"))
            }
            ArchKind::Cnn => {
                if self.cnn_channels.is_empty() || self.cnn_channels.contains(&0) {
                    return Err(Error::config(
                        "CNN needs at least one stage with positive channel count",
                    ));
                }
                let divisor = 1usize << self.cnn_channels.len();
                if self.n % divisor != 0 {
                    return Err(Error::config(format!(
                        "CNN with {} pooling stages needs N divisible by {divisor}, got {}",
                        self.cnn_channels.len(),
                        self.n
                    )));
                }
                Ok(())
            }
            ArchKind::Rnn if self.rnn_hidden == 0 => {
                Err(Error::config("LSTM hidden size must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Parameter counts: multiplicative weights only, and weights plus biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub weights_only: usize,
    pub total_with_biases: usize,
}

/// Closed-form parameter count for `spec`.
pub fn param_count(spec: &ArchitectureSpec) -> Result<ParamCount> {
    spec.validate()?;
    let (weights, biases) = match spec.kind {
        ArchKind::Mlp => {
            let widths: Vec<usize> = std::iter::once(spec.n)
                .chain(spec.mlp_hidden.iter().copied())
                .chain([spec.k])
                .collect();
            widths
                .windows(2)
                .fold((0, 0), |(w, b), p| (w + p[0] * p[1], b + p[1]))
        }
        ArchKind::Cnn => {
            let mut w = 0;
            let mut b = 0;
            let mut cin = 1;
            for &cout in &spec.cnn_channels {
                w += 3 * cin * cout;
                b += cout;
                cin = cout;
            }
            let last_kernel = spec.n >> spec.cnn_channels.len();
            (w + last_kernel * cin * spec.k, b + spec.k)
        }
        ArchKind::Rnn => {
            let h = spec.rnn_hidden;
            (4 * h * (h + 1) + h * spec.k, 4 * h + spec.k)
        }
    };
    Ok(ParamCount {
        weights_only: weights,
        total_with_biases: weights + biases,
    })
}

/// Builds and Xavier-initialises the network described by `spec`.
pub fn build_network<T: Real, R: Rng + ?Sized>(
    spec: &ArchitectureSpec,
    rng: &mut R,
) -> Result<Network<T>> {
    spec.validate()?;
    let dropout = Layer::Dropout(Dropout { p: spec.dropout });
    let mut layers = Vec::new();
    match spec.kind {
        ArchKind::Mlp => {
            let mut width = spec.n;
            for &h in &spec.mlp_hidden {
                layers.push(Layer::Dense(Dense::new(width, h, rng)));
                layers.push(Layer::Relu);
                layers.push(dropout.clone());
                width = h;
            }
            layers.push(Layer::Dense(Dense::new(width, spec.k, rng)));
        }
        ArchKind::Cnn => {
            let mut cin = 1;
            for &cout in &spec.cnn_channels {
                layers.push(Layer::Conv1d(Conv1d::new(cin, cout, 3, 1, rng)));
                layers.push(Layer::Relu);
                layers.push(Layer::MaxPool1d(MaxPool1d { size: 2, stride: 2 }));
                layers.push(dropout.clone());
                cin = cout;
            }
            let last_kernel = spec.n >> spec.cnn_channels.len();
            layers.push(Layer::Conv1d(Conv1d::new(cin, spec.k, last_kernel, 0, rng)));
        }
        ArchKind::Rnn => {
            layers.push(Layer::Lstm(Lstm::new(1, spec.rnn_hidden, rng)));
            layers.push(dropout);
            layers.push(Layer::Dense(Dense::new(spec.rnn_hidden, spec.k, rng)));
        }
    }
    layers.push(Layer::Sigmoid);
    let net = Network::new(spec.n, layers)?;
    debug_assert_eq!(net.output_len(), spec.k);
    Ok(net)
}

/// A decoder network together with the architecture that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub spec: ArchitectureSpec,
    pub net: Network<f32>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: NetworkModel,
}

impl NetworkModel {
    pub fn build<R: Rng + ?Sized>(spec: &ArchitectureSpec, rng: &mut R) -> Result<Self> {
        Ok(NetworkModel {
            spec: spec.clone(),
            net: build_network(spec, rng)?,
        })
    }

    pub fn kind(&self) -> ArchKind {
        self.spec.kind
    }

    pub fn param_count(&self) -> ParamCount {
        ParamCount {
            weights_only: self.net.weight_count(),
            total_with_biases: self.net.param_count(),
        }
    }

    /// Hard decisions for a batch of received vectors `[batch × N]`:
    /// bit 1 iff the sigmoid output is strictly above 0.5.
    pub fn decode_batch(&self, y: ndarray::ArrayView2<f32>) -> Result<Array2<u8>> {
        Ok(self.net.infer(y)?.mapv(threshold))
    }

    /// One-shot decode of a single received vector.
    pub fn decode(&self, y: &RealVector) -> Result<BitVector> {
        if y.len() != self.spec.n {
            return Err(Error::argument(format!(
                "received vector has length {}, model expects N = {}",
                y.len(),
                self.spec.n
            )));
        }
        let input = Array2::from_shape_fn((1, y.len()), |(_, j)| y.values()[j] as f32);
        let bits = self.decode_batch(input.view())?;
        BitVector::new(bits.into_raw_vec_and_offset().0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        file.model.spec.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[inline]
pub fn threshold(p: f32) -> u8 {
    u8::from(p > 0.5)
}
