use ndarray::{s, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_cols, glorot, sigmoid};
use crate::error::Result;

/// Single LSTM layer; gate blocks are laid out `[input, forget, candidate, output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// `(4H, in)`
    pub w_input: Array2<f64>,
    /// `(4H, H)`
    pub w_hidden: Array2<f64>,
    /// `(1, 4H)`
    pub bias: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_input: Array2<f64>,
    pub w_hidden: Array2<f64>,
    pub bias: Array2<f64>,
}

impl LstmGrads {
    pub fn zeros_like(layer: &LstmLayer) -> Self {
        LstmGrads {
            w_input: Array2::zeros(layer.w_input.dim()),
            w_hidden: Array2::zeros(layer.w_hidden.dim()),
            bias: Array2::zeros(layer.bias.dim()),
        }
    }
}

impl LstmLayer {
    /// Glorot weights, zero bias except +1 on the forget gate.
    pub fn new(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
        LstmLayer { w_input: glorot(4 * hidden, input, rng), w_hidden: glorot(4 * hidden, hidden, rng), bias }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    /// One time step over a batch; returns `(h, c, cache)`.
    pub fn step(
        &self,
        x: ArrayView2<f64>,
        h_prev: ArrayView2<f64>,
        c_prev: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, LstmStepCache)> {
        let hd = self.hidden_dim();
        check_cols(&x, self.input_dim())?;
        check_cols(&h_prev, hd)?;
        check_cols(&c_prev, hd)?;
        let z = x.dot(&self.w_input.t()) + h_prev.dot(&self.w_hidden.t()) + &self.bias;
        let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
        let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * hd..]).mapv(sigmoid);
        let c = &f * &c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;
        let cache =
            LstmStepCache { x: x.to_owned(), h_prev: h_prev.to_owned(), c_prev: c_prev.to_owned(), i, f, g, o, tanh_c };
        Ok((h, c, cache))
    }

    /// Backward through one step given gradients on `h` and `c`; accumulates
    /// parameter grads and returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        cache: &LstmStepCache,
        dh: ArrayView2<f64>,
        dc: ArrayView2<f64>,
        grads: &mut LstmGrads,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let hd = self.hidden_dim();
        let LstmStepCache { x, h_prev, c_prev, i, f, g, o, tanh_c } = cache;
        let d_o = &dh * tanh_c;
        let dc = &dc + &(&dh * o * tanh_c.mapv(|t| 1.0 - t * t));
        let di = &dc * g;
        let dg = &dc * i;
        let df = &dc * c_prev;
        let dc_prev = &dc * f;

        let mut dz = Array2::zeros((x.nrows(), 4 * hd));
        dz.slice_mut(s![.., 0..hd]).assign(&(&di * &i.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., hd..2 * hd]).assign(&(&df * &f.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., 2 * hd..3 * hd]).assign(&(&dg * &g.mapv(|v| 1.0 - v * v)));
        dz.slice_mut(s![.., 3 * hd..]).assign(&(&d_o * &o.mapv(|v| v * (1.0 - v))));

        grads.w_input += &dz.t().dot(x);
        grads.w_hidden += &dz.t().dot(h_prev);
        grads.bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        (dz.dot(&self.w_input), dz.dot(&self.w_hidden), dc_prev)
    }

    pub fn params(&self) -> [&Array2<f64>; 3] {
        [&self.w_input, &self.w_hidden, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Array2<f64>; 3] {
        [&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}
