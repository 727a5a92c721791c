use ndarray::ArrayD;
use rand::Rng;

use super::Real;

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Fan-in and fan-out of a weight tensor: `[in, out]` for matrices and
/// `[out_channels, in_channels, kernel]` for convolution kernels.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [fan_in, fan_out] => (*fan_in, *fan_out),
        [out_ch, in_ch, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (in_ch * receptive, out_ch * receptive)
        }
        [] => panic!("xavier_init needs a non-empty shape"),
    }
}

/// Samples a weight tensor uniformly from `[−b, b]` with `b = xavier_bound`.
pub fn xavier_init<T: Real, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> ArrayD<T> {
    let (fan_in, fan_out) = fans(shape);
    let bound = xavier_bound(fan_in, fan_out);
    ArrayD::from_shape_simple_fn(shape, || T::from(rng.random_range(-bound..=bound)).unwrap())
}
