use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::train::Tensor;

/// Fan-in and fan-out of a weight shape `[out, in, receptive...]`.
/// Rank-1 shapes count the single dimension as both.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [] => (1, 1),
        [n] => (*n, *n),
        [out, inp, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (inp * receptive, out * receptive)
        }
    }
}

/// Glorot/Xavier uniform initialisation on `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_with(shape, &mut rng)
}

pub fn xavier_with<R: Rng>(shape: &[usize], rng: &mut R) -> Result<Tensor> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "xavier_init needs a non-empty shape, got {shape:?}"
        )));
    }
    let (fan_in, fan_out) = fans(shape);
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data)
}
