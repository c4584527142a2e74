use ndarray::{Array2, ArrayView1};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient w.r.t. the logits that produced the distribution: `p − one_hot(target)`.
    pub grad: Vec<f64>,
    /// True when `p[target]` was below [`PROB_FLOOR`].
    pub clamped: bool,
}

/// `−ln p[target]` for an already-normalized distribution.
pub fn cross_entropy(p: ArrayView1<f64>, target: usize) -> CrossEntropy {
    let pt = p[target];
    let clamped = pt < PROB_FLOOR;
    let mut grad = p.to_vec();
    grad[target] -= 1.0;
    CrossEntropy { loss: -pt.max(PROB_FLOOR).ln(), grad, clamped }
}

/// Row-wise numerically stable softmax, in place.
pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Softmax + cross-entropy over logits rows. `weights[b]` scales row `b`'s loss
/// (zero masks the row). Returns `(Σ_b w_b·loss_b, d logits, probabilities)`.
pub fn softmax_cross_entropy(logits: &Array2<f64>, targets: &[usize], weights: &[f64]) -> (f64, Array2<f64>, Array2<f64>) {
    let mut p = logits.clone();
    softmax_rows(&mut p);
    let mut d = p.clone();
    let mut total = 0.0;
    for (b, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        let mut row = d.row_mut(b);
        if w == 0.0 {
            row.fill(0.0);
            continue;
        }
        total += w * -p[[b, t]].max(PROB_FLOOR).ln();
        row[t] -= 1.0;
        row.mapv_inplace(|v| v * w);
    }
    (total, d, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_hot_correct_prediction_has_zero_loss() {
        let ce = cross_entropy(array![0.0, 1.0, 0.0].view(), 1);
        assert!(ce.loss.abs() < 1e-15);
        assert!(!ce.clamped);
    }

    #[test]
    fn uniform_over_four_is_ln4() {
        let ce = cross_entropy(array![0.25, 0.25, 0.25, 0.25].view(), 2);
        assert!((ce.loss - 4f64.ln()).abs() < 1e-15);
        assert_eq!(ce.grad, vec![0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn zero_probability_is_clamped_and_flagged() {
        let ce = cross_entropy(array![1.0, 0.0].view(), 1);
        assert!(ce.clamped);
        assert!((ce.loss + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn masked_rows_contribute_nothing() {
        let logits = array![[1.0, 2.0], [3.0, -1.0]];
        let (loss, d, _) = softmax_cross_entropy(&logits, &[0, 1], &[1.0, 0.0]);
        let (loss1, _, _) = softmax_cross_entropy(&array![[1.0, 2.0]], &[0], &[1.0]);
        assert_eq!(loss, loss1);
        assert!(d.row(1).iter().all(|&v| v == 0.0));
    }
}
