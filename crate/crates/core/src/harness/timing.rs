use std::fmt;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::decoders::NetworkModel;
use crate::neuralnet::{mse_loss_grad, Mode};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Inference pass for one received vector.
    Forward,
    /// Training-mode forward pass plus backpropagation for one sample.
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

/// Median wall-clock time in microseconds of a single-sample pass, over
/// `repetitions` timed runs after `repetitions / 10` (at least 10) untimed
/// warm-up runs.
pub fn time_per_sample(
    model: &NetworkModel,
    direction: Direction,
    repetitions: usize,
) -> Result<f64> {
    if repetitions < 100 {
        return Err(Error::argument(format!(
            "need at least 100 repetitions, got {repetitions}"
        )));
    }
    let n = model.spec.n;
    let y = Array2::from_shape_fn((1, n), |(_, j)| if j % 3 == 0 { -0.8f32 } else { 1.1 });
    let target = Array2::from_shape_fn((1, model.spec.k), |(_, j)| (j % 2) as f32);
    let mut dropout = rng::stream(0, rng::domain::DROPOUT, 0);
    let mut pass = || -> Result<()> {
        match direction {
            Direction::Forward => {
                std::hint::black_box(model.net.infer(y.view())?);
            }
            Direction::Backward => {
                let (out, tape) = model
                    .net
                    .forward_train(y.view(), Mode::Train, &mut dropout)?;
                let grads = model
                    .net
                    .backward(tape, mse_loss_grad(target.view(), out.view())?)?;
                std::hint::black_box(grads);
            }
        }
        Ok(())
    };
    for _ in 0..(repetitions / 10).max(10) {
        pass()?;
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        pass()?;
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    Ok(if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{ArchKind, ArchitectureSpec};

    #[test]
    fn positive_and_validated() {
        let model = NetworkModel::build(
            &ArchitectureSpec::half_rate(ArchKind::Mlp, 8),
            &mut rng::stream(0, 0, 0),
        )
        .unwrap();
        assert!(time_per_sample(&model, Direction::Forward, 100).unwrap() > 0.0);
        assert!(time_per_sample(&model, Direction::Backward, 100).unwrap() > 0.0);
        assert!(time_per_sample(&model, Direction::Forward, 99).is_err());
    }
}
