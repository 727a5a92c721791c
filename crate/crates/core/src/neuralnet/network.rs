use ndarray::{Array2, Array3, ArrayD, ArrayView2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Cache, Layer};
use super::{Mode, Real};
use crate::{Error, Result};

/// A feed-forward stack of layers mapping `[batch × input_len]` to
/// `[batch × output_len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Network<T> {
    input_len: usize,
    output_len: usize,
    layers: Vec<Layer<T>>,
}

/// Forward-pass record consumed by [`Network::backward`].
#[derive(Debug)]
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
    out_dim: (usize, usize, usize),
}

impl<T: Real> Network<T> {
    /// Validates the layer stack by shape propagation from `(1, input_len)`.
    pub fn new(input_len: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_len == 0 {
            return Err(Error::config("network input length must be positive"));
        }
        let (ch, len) = layers
            .iter()
            .try_fold((1, input_len), |shape, l| l.output_shape(shape))?;
        Ok(Network {
            input_len,
            output_len: ch * len,
            layers,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// `(channels, length)` after each layer.
    pub fn shape_trace(&self) -> Vec<(usize, usize)> {
        let mut shape = (1, self.input_len);
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(shape).expect("validated at construction");
                shape
            })
            .collect()
    }

    /// Parameter tensors in declaration order (per layer: weights, biases).
    pub fn params(&self) -> Vec<ArrayViewD<'_, T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(Layer::weight_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight_count() + l.bias_count())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            input_len: self.input_len,
            output_len: self.output_len,
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        if input.ncols() != self.input_len {
            return Err(Error::argument(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_len
            )));
        }
        if input.nrows() == 0 {
            return Err(Error::argument("empty batch"));
        }
        Ok(())
    }

    fn to_activation(input: ArrayView2<T>) -> Array3<T> {
        let (b, n) = input.dim();
        input
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, 1, n))
            .unwrap()
    }

    fn to_output(&self, out: Array3<T>) -> Array2<T> {
        let batch = out.dim().0;
        let out = if out.is_standard_layout() {
            out
        } else {
            out.as_standard_layout().into_owned()
        };
        out.into_shape_with_order((batch, self.output_len)).unwrap()
    }

    /// Forward pass without recording a tape.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: ArrayView2<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Array2<T>> {
        self.check_input(&input)?;
        let mut x = Self::to_activation(input);
        for layer in &self.layers {
            x = layer.forward(x, mode, rng).0;
        }
        Ok(self.to_output(x))
    }

    /// Inference-mode forward pass (dropout disabled, no randomness).
    pub fn infer(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        // Never drawn from in inference mode.
        self.forward(input, Mode::Infer, &mut crate::rng::stream(0, 0, 0))
    }

    /// Forward pass that records what [`Network::backward`] needs.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        input: ArrayView2<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Array2<T>, Tape<T>)> {
        self.check_input(&input)?;
        let mut x = Self::to_activation(input);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(x, mode, rng);
            caches.push(cache);
            x = next;
        }
        let out_dim = x.dim();
        Ok((self.to_output(x), Tape { caches, out_dim }))
    }

    /// Backpropagates `grad_out = ∂L/∂output` and returns `∂L/∂θ` for every
    /// tensor of [`Network::params`], in the same order.
    pub fn backward(&self, tape: Tape<T>, grad_out: Array2<T>) -> Result<Vec<ArrayD<T>>> {
        let (b, c, l) = tape.out_dim;
        if grad_out.dim() != (b, c * l) {
            return Err(Error::argument(format!(
                "output gradient shape {:?} does not match output ({b}, {})",
                grad_out.dim(),
                c * l
            )));
        }
        let mut dy = grad_out.into_shape_with_order(tape.out_dim).unwrap();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(tape.caches).rev() {
            let (dx, grads) = layer.backward(cache, dy);
            per_layer.push(grads);
            dy = dx;
        }
        Ok(per_layer.into_iter().rev().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Conv1d, Dense, Dropout, Lstm, MaxPool1d};
    use super::*;
    use crate::rng;
    use ndarray::{array, Array1};

    #[test]
    fn dense_cancellation_example() {
        let dense = Dense {
            weight: array![[1.0f64], [1.0]],
            bias: Array1::zeros(1),
        };
        let net = Network::new(2, vec![Layer::Dense(dense), Layer::Sigmoid]).unwrap();
        assert_eq!(
            net.infer(array![[2.0, -2.0]].view()).unwrap(),
            array![[0.5]]
        );
    }

    #[test]
    fn rejects_inconsistent_stack() {
        let mut r = rng::stream(0, 0, 0);
        let layers = vec![
            Layer::Dense(Dense::<f32>::new(4, 3, &mut r)),
            Layer::Dense(Dense::new(4, 2, &mut r)),
        ];
        assert!(matches!(Network::new(4, layers), Err(Error::Config(_))));
        let net = Network::new(4, vec![Layer::Dense(Dense::<f32>::new(4, 3, &mut r))]).unwrap();
        assert!(matches!(
            net.infer(Array2::zeros((2, 5)).view()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn conv_preserves_length_with_padding() {
        let mut r = rng::stream(0, 0, 0);
        let net = Network::new(
            8,
            vec![
                Layer::Conv1d(Conv1d::<f32>::new(1, 4, 3, 1, &mut r)),
                Layer::MaxPool1d(MaxPool1d { size: 2, stride: 2 }),
                Layer::Conv1d(Conv1d::new(4, 2, 4, 0, &mut r)),
            ],
        )
        .unwrap();
        assert_eq!(net.shape_trace(), vec![(4, 8), (4, 4), (2, 1)]);
        assert_eq!(net.output_len(), 2);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let conv = Conv1d {
            weight: array![[[1.0f64, 2.0, 3.0]], [[0.0, -1.0, 0.5]]],
            bias: array![0.5, -0.5],
            padding: 1,
        };
        let net = Network::new(4, vec![Layer::Conv1d(conv)]).unwrap();
        let out = net.infer(array![[1.0, 2.0, 3.0, 4.0]].view()).unwrap();
        // channel 0: [0*1+1*2+2*3, 1+4+9, 2+6+12, 3+8+0] + 0.5
        // channel 1: [-1+1, -2+1.5, -3+2, -4+0] - 0.5
        let expected = array![[8.5, 14.5, 20.5, 11.5, -0.5, -1.0, -1.5, -4.5]];
        assert_eq!(out, expected);
    }

    #[test]
    fn max_pool_routes_gradient_to_first_maximum() {
        let net = Network::new(
            4,
            vec![Layer::<f64>::MaxPool1d(MaxPool1d { size: 2, stride: 2 })],
        )
        .unwrap();
        let mut r = rng::stream(0, 0, 0);
        let (out, tape) = net
            .forward_train(array![[1.0, 1.0, -2.0, 5.0]].view(), Mode::Train, &mut r)
            .unwrap();
        assert_eq!(out, array![[1.0, 5.0]]);
        let grads = net.backward(tape, array![[1.0, 2.0]]).unwrap();
        assert!(grads.is_empty());
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let lstm = Lstm {
            weight: Array2::<f64>::zeros((4, 12)),
            bias: Array1::zeros(12),
            input_size: 1,
            hidden: 3,
        };
        let net = Network::new(5, vec![Layer::Lstm(lstm)]).unwrap();
        // i = f = o = 0.5, g = 0 → c stays 0 → h = 0
        assert!(net
            .infer(array![[1.0, -1.0, 2.0, 0.5, 3.0]].view())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn infer_is_deterministic_and_dropout_is_identity() {
        let mut r = rng::stream(1, 0, 0);
        let net = Network::new(
            6,
            vec![
                Layer::Dense(Dense::<f32>::new(6, 10, &mut r)),
                Layer::Dropout(Dropout { p: 0.5 }),
                Layer::Dense(Dense::new(10, 2, &mut r)),
            ],
        )
        .unwrap();
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i * 6 + j) as f32 * 0.1);
        let a = net.infer(x.view()).unwrap();
        assert_eq!(a, net.infer(x.view()).unwrap());
        let b = net
            .forward(x.view(), Mode::Train, &mut rng::stream(2, 0, 0))
            .unwrap();
        assert_ne!(a, b);
    }
}
