//! Named gradient-check targets: single layers and whole decoders.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::{build_network, ArchKind, ArchitectureSpec};
use crate::neuralnet::{
    gradient_check, Conv1d, Dense, GradCheckReport, Layer, Lstm, MaxPool1d, Mode, Network,
    ParamSelection,
};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradTarget {
    Dense,
    Conv,
    /// Max pooling has no parameters; it is checked behind a convolution so
    /// that the convolution's gradients pass through the pooling backward.
    Pool,
    Lstm,
    Mlp,
    Cnn,
    Rnn,
}

impl GradTarget {
    pub const ALL: [GradTarget; 7] = [
        GradTarget::Dense,
        GradTarget::Conv,
        GradTarget::Pool,
        GradTarget::Lstm,
        GradTarget::Mlp,
        GradTarget::Cnn,
        GradTarget::Rnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GradTarget::Dense => "dense",
            GradTarget::Conv => "conv",
            GradTarget::Pool => "pool",
            GradTarget::Lstm => "lstm",
            GradTarget::Mlp => "mlp",
            GradTarget::Cnn => "cnn",
            GradTarget::Rnn => "rnn",
        }
    }
}

impl fmt::Display for GradTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GradTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradTarget::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::argument(format!("unknown gradient-check target '{s}'")))
    }
}

/// Options for [`check_target`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSetup {
    /// Code length; the input width of every target.
    pub n: usize,
    pub k: usize,
    pub batch: usize,
    /// Central-difference step.
    pub h: f64,
    /// Hidden size of the full RNN decoder.
    pub rnn_hidden: usize,
    /// Entries checked per tensor when the network has more than
    /// `full_check_limit` parameters.
    pub sample_per_tensor: usize,
    pub full_check_limit: usize,
    /// Targets are the network's own outputs shifted by at most this much.
    /// A small offset keeps the loss, and with it the rounding noise of the
    /// finite differences, small.
    pub target_offset: f64,
    /// Dropout probability of the full decoders.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for GradCheckSetup {
    fn default() -> Self {
        GradCheckSetup {
            n: 8,
            k: 4,
            batch: 4,
            h: 1e-5,
            rnn_hidden: 256,
            sample_per_tensor: 256,
            full_check_limit: 20_000,
            target_offset: 0.01,
            dropout: 0.1,
            seed: 1,
        }
    }
}

fn target_network<R: Rng + ?Sized>(
    target: GradTarget,
    s: &GradCheckSetup,
    rng: &mut R,
) -> Result<Network<f64>> {
    let n = s.n;
    let arch = |kind| {
        let mut spec = ArchitectureSpec::new(kind, n, s.k);
        spec.rnn_hidden = s.rnn_hidden;
        spec.dropout = s.dropout;
        spec
    };
    match target {
        GradTarget::Dense => Network::new(n, vec![Layer::Dense(Dense::new(n, s.k, rng))]),
        GradTarget::Conv => Network::new(n, vec![Layer::Conv1d(Conv1d::new(1, 3, 3, 1, rng))]),
        GradTarget::Pool => Network::new(
            n,
            vec![
                Layer::Conv1d(Conv1d::new(1, 3, 3, 1, rng)),
                Layer::MaxPool1d(MaxPool1d { size: 2, stride: 2 }),
            ],
        ),
        GradTarget::Lstm => Network::new(n, vec![Layer::Lstm(Lstm::new(1, 6, rng))]),
        GradTarget::Mlp => build_network(&arch(ArchKind::Mlp), rng),
        GradTarget::Cnn => build_network(&arch(ArchKind::Cnn), rng),
        GradTarget::Rnn => build_network(&arch(ArchKind::Rnn), rng),
    }
}

/// Builds `target` in 64-bit precision with Xavier weights and small random
/// biases, draws a random input batch with targets near the network output,
/// and runs [`gradient_check`] in train mode (dropout active, fixed mask).
pub fn check_target(target: GradTarget, setup: &GradCheckSetup) -> Result<GradCheckReport> {
    if setup.batch == 0 {
        return Err(Error::argument("batch must be at least 1"));
    }
    let mut r = rng::stream(setup.seed, rng::domain::INIT, 0);
    let mut net = target_network(target, setup, &mut r)?;
    // Zero biases would leave bias gradients of pooled-away or dead units at
    // exactly zero and hide errors in the bias paths.
    for mut p in net.params_mut() {
        if p.ndim() == 1 {
            p.mapv_inplace(|_| r.random_range(-0.1..0.1));
        }
    }
    let mut data = rng::stream(setup.seed, rng::domain::VALIDATION, 0);
    let input =
        Array2::from_shape_simple_fn((setup.batch, setup.n), || data.random_range(-1.5..1.5));
    let out = net.forward(
        input.view(),
        Mode::Train,
        &mut rng::stream(setup.seed, rng::domain::DROPOUT, 0),
    )?;
    let target_y = out.mapv(|v| v + data.random_range(-setup.target_offset..setup.target_offset));
    let selection = if net.param_count() > setup.full_check_limit {
        ParamSelection::Sample {
            per_tensor: setup.sample_per_tensor,
            seed: setup.seed,
        }
    } else {
        ParamSelection::All
    };
    gradient_check(
        &net,
        input.view(),
        target_y.view(),
        setup.h,
        selection,
        setup.seed,
    )
}
