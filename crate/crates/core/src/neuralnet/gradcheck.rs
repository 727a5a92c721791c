//! Central-difference validation of the analytic gradients.

use ndarray::ArrayView2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{mse_loss, mse_loss_grad, Mode, Network};
use crate::{rng, Error, Result};

/// Which scalar parameters to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamSelection {
    All,
    /// At most `per_tensor` entries of each tensor, chosen without replacement.
    Sample {
        per_tensor: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(tensor, flat index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    /// Analytic and numerical gradient at the worst entry.
    pub worst_values: Option<(f64, f64)>,
    /// Largest `|g_a − g_n|` over all checked entries.
    pub max_abs_error: f64,
    /// Largest `|g_a|` over all checked entries.
    pub max_abs_grad: f64,
}

/// Compares backpropagated gradients of the MSE loss with
/// `(L(θ+h) − L(θ−h)) / 2h` and reports the largest
/// `|g_a − g_n| / max(|g_a|, |g_n|, 1e−12)`.
///
/// The network runs in train mode; every loss evaluation reseeds the dropout
/// stream from `dropout_seed` so that all evaluations share one mask.
pub fn gradient_check(
    net: &Network<f64>,
    input: ArrayView2<f64>,
    target: ArrayView2<f64>,
    h: f64,
    selection: ParamSelection,
    dropout_seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::argument(format!("step {h} outside [1e-7, 1e-3]")));
    }
    let dropout_rng = || rng::stream(dropout_seed, rng::domain::DROPOUT, 0);
    let (out, tape) = net.forward_train(input, Mode::Train, &mut dropout_rng())?;
    let analytic = net.backward(tape, mse_loss_grad(target, out.view())?)?;

    let loss = |n: &Network<f64>| -> Result<f64> {
        let out = n.forward(input, Mode::Train, &mut dropout_rng())?;
        mse_loss(target, out.view())
    };

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
        worst_values: None,
        max_abs_error: 0.0,
        max_abs_grad: 0.0,
    };
    for (t, grad) in analytic.iter().enumerate() {
        let len = grad.len();
        let indices: Vec<usize> = match selection {
            ParamSelection::All => (0..len).collect(),
            ParamSelection::Sample { per_tensor, seed } => {
                let mut r = rng::stream(seed, rng::domain::VALIDATION, t as u64);
                let mut v = index::sample(&mut r, len, per_tensor.min(len)).into_vec();
                v.sort_unstable();
                v
            }
        };
        let grad = grad
            .as_slice_memory_order()
            .expect("gradients are contiguous");
        for i in indices {
            let original = param_slot(&mut probe, t, i);
            set_param(&mut probe, t, i, original + h);
            let plus = loss(&probe)?;
            set_param(&mut probe, t, i, original - h);
            let minus = loss(&probe)?;
            set_param(&mut probe, t, i, original);

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel;
                report.worst = Some((t, i));
                report.worst_values = Some((a, numeric));
            }
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            report.max_abs_grad = report.max_abs_grad.max(a.abs());
            report.checked += 1;
        }
    }
    Ok(report)
}

fn param_slot(net: &mut Network<f64>, tensor: usize, index: usize) -> f64 {
    net.params_mut()[tensor].as_slice_memory_order().unwrap()[index]
}

fn set_param(net: &mut Network<f64>, tensor: usize, index: usize, value: f64) {
    net.params_mut()[tensor]
        .as_slice_memory_order_mut()
        .unwrap()[index] = value;
}
