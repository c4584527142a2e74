#![allow(dead_code)]

use ndarray::Array2;

pub mod grad;
pub mod toy;

/// Central finite differences of `loss` w.r.t. every entry of `param`.
pub fn numeric_grad(param: &mut Array2<f64>, eps: f64, mut loss: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(param.dim());
    for idx in 0..param.len() {
        let (r, c) = (idx / param.ncols(), idx % param.ncols());
        let orig = param[[r, c]];
        param[[r, c]] = orig + eps;
        let up = loss(param);
        param[[r, c]] = orig - eps;
        let down = loss(param);
        param[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * eps);
    }
    g
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all entries.
pub fn max_rel_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    assert_eq!(analytic.dim(), numeric.dim());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// The defining O(n²) double sum for the Gini coefficient.
pub fn gini_double_sum(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}
