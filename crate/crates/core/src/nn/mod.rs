//! Small CPU neural toolkit: dense and LSTM layers with explicit backward passes,
//! softmax cross-entropy, Adam with per-update learning-rate decay and an
//! early-stopping training loop.
//!
//! All parameters are `Array2<f64>`; biases are stored as `(1, n)` rows so a
//! model's parameters can be handed to the optimizer as one flat list.

mod adam;
mod dense;
mod loss;
mod lstm;
mod train;

pub use adam::Adam;
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use loss::{cross_entropy, softmax_cross_entropy, softmax_rows, CrossEntropy};
pub use lstm::{LstmGrads, LstmLayer, LstmStepCache};
pub use train::{train_loop, History, Network, TrainConfig};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Glorot-uniform matrix of shape `(rows, cols)`; fan_in = cols, fan_out = rows.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

pub(crate) fn check_cols(x: &ndarray::ArrayView2<f64>, expected: usize) -> crate::Result<()> {
    if x.ncols() != expected {
        return Err(crate::Error::shape(("batch", expected), x.dim()));
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
