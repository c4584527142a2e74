use ndarray::{Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_cols, glorot, softmax_rows};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Softmax,
}

/// `y = act(x · Wᵀ + b)` over a batch of row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `(out, in)`
    pub weight: Array2<f64>,
    /// `(1, out)`
    pub bias: Array2<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Array2<f64>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        DenseLayer { weight: glorot(output, input, rng), bias: Array2::zeros((1, output)), activation }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<DenseCache> {
        check_cols(&x, self.input_dim())?;
        let mut z = x.dot(&self.weight.t()) + &self.bias;
        match self.activation {
            Activation::Identity => {}
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Softmax => softmax_rows(&mut z),
        }
        Ok(DenseCache { input: x.to_owned(), output: z })
    }

    /// Returns `(d input, parameter grads)` for upstream gradient `dy` on the activated output.
    pub fn backward(&self, cache: &DenseCache, dy: ArrayView2<f64>) -> Result<(Array2<f64>, DenseGrads)> {
        if dy.dim() != cache.output.dim() {
            return Err(crate::Error::shape(cache.output.dim(), dy.dim()));
        }
        let y = &cache.output;
        let dz = match self.activation {
            Activation::Identity => dy.to_owned(),
            Activation::Tanh => &dy * &y.mapv(|v| 1.0 - v * v),
            Activation::Relu => &dy * &y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            Activation::Softmax => {
                let dot = (&dy * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                y * &(&dy - &dot)
            }
        };
        let grads = DenseGrads { weight: dz.t().dot(&cache.input), bias: dz.sum_axis(Axis(0)).insert_axis(Axis(0)) };
        Ok((dz.dot(&self.weight), grads))
    }

    pub fn params(&self) -> [&Array2<f64>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Array2<f64>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
