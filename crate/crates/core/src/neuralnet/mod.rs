//! Minimal neural-network kernel with hand-written backpropagation.
//!
//! Activations flow between layers as `[batch × channels × length]` arrays.
//! A network input `[batch × N]` enters as one channel of length `N`; the
//! final activation is flattened to `[batch × K]`.
//!
//! Networks are generic over [`Real`]: training runs in `f32`, gradient checks
//! in `f64` (see [`Network::cast`]).

mod adam;
mod gradcheck;
mod init;
mod layers;
mod network;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, GradCheckReport, ParamSelection};
pub use init::{xavier_bound, xavier_init};
pub use layers::{Conv1d, Dense, Dropout, Layer, Lstm, MaxPool1d};
pub use network::{Network, Tape};

use ndarray::{ArrayView2, NdFloat, Zip};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floating-point element type of a network.
pub trait Real: NdFloat + SampleUniform + Serialize + DeserializeOwned + Default {}

impl Real for f32 {}
impl Real for f64 {}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStepReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub step_index: u64,
}

/// Mean over the batch of `(1/K) Σ_i (x_i − x̂_i)²`.
pub fn mse_loss<T: Real>(x: ArrayView2<T>, x_hat: ArrayView2<T>) -> Result<T> {
    check_same_shape(x, x_hat)?;
    let count = T::from(x.len()).unwrap();
    let sum = Zip::from(&x)
        .and(&x_hat)
        .fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b));
    Ok(sum / count)
}

/// Gradient of [`mse_loss`] with respect to `x_hat`.
pub fn mse_loss_grad<T: Real>(
    x: ArrayView2<T>,
    x_hat: ArrayView2<T>,
) -> Result<ndarray::Array2<T>> {
    check_same_shape(x, x_hat)?;
    let scale = T::from(2.0).unwrap() / T::from(x.len()).unwrap();
    Ok(Zip::from(&x)
        .and(&x_hat)
        .map_collect(|&a, &b| scale * (b - a)))
}

fn check_same_shape<T>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::argument(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// One training step: forward in train mode, MSE loss, backpropagation and an
/// Adam update.
pub fn backward_and_step<T: Real, R: Rng + ?Sized>(
    net: &mut Network<T>,
    adam: &mut Adam<T>,
    batch_x: ArrayView2<T>,
    batch_y: ArrayView2<T>,
    rng: &mut R,
) -> Result<TrainStepReport> {
    let (x_hat, tape) = net.forward_train(batch_x, Mode::Train, rng)?;
    let loss = mse_loss(batch_y, x_hat.view())?.to_f64().unwrap();
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss {loss} at step {}",
            adam.step() + 1
        )));
    }
    let grad_out = mse_loss_grad(batch_y, x_hat.view())?;
    let grads = net.backward(tape, grad_out)?;
    let grad_norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v.to_f64().unwrap().powi(2))
        .sum::<f64>()
        .sqrt();
    if !grad_norm.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite gradient at step {}",
            adam.step() + 1
        )));
    }
    adam.update(net, &grads)?;
    Ok(TrainStepReport {
        loss,
        grad_norm,
        step_index: adam.step(),
    })
}

/// Logistic function, kept strictly inside `(0, 1)` for finite inputs.
#[inline]
pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    let one = T::one();
    let s = if v >= T::zero() {
        one / (one + (-v).exp())
    } else {
        let e = v.exp();
        e / (one + e)
    };
    s.max(T::min_positive_value())
        .min(one - T::epsilon() / T::from(2.0).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mse_examples() {
        let x = array![[1.0f64, 0.0, 1.0, 0.0]];
        assert_eq!(mse_loss(x.view(), x.view()).unwrap(), 0.0);
        assert_eq!(
            mse_loss(array![[1.0f64]].view(), array![[0.0]].view()).unwrap(),
            1.0
        );
        assert_eq!(
            mse_loss(x.view(), array![[0.5, 0.5, 0.5, 0.5]].view()).unwrap(),
            0.25
        );
        // batch mean of per-sample losses 0.25 and 1.0
        let xb = array![[1.0f64, 0.0], [1.0, 1.0]];
        let hb = array![[0.5f64, 0.5], [0.0, 0.0]];
        assert_eq!(mse_loss(xb.view(), hb.view()).unwrap(), 0.625);
        assert!(mse_loss(x.view(), array![[0.5, 0.5]].view()).is_err());
    }

    #[test]
    fn mse_grad_is_zero_at_zero_residual() {
        let x = array![[1.0f32, 0.0, 1.0], [0.0, 0.0, 1.0]];
        assert!(mse_loss_grad(x.view(), x.view())
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn sigmoid_stays_open_interval() {
        for v in [
            -1e30f32,
            -200.0,
            -20.0,
            0.0,
            20.0,
            200.0,
            1e30,
            f32::MAX,
            f32::MIN,
        ] {
            let s = sigmoid(v);
            assert!(s > 0.0 && s < 1.0, "sigmoid({v}) = {s}");
        }
        for v in [-1e300f64, -800.0, 40.0, 800.0] {
            let s = sigmoid(v);
            assert!(s > 0.0 && s < 1.0, "sigmoid({v}) = {s}");
        }
        assert_eq!(sigmoid(0.0f64), 0.5);
    }
}
