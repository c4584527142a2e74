use ndarray::{Array2, Zip};

/// Adam (β1 = 0.9, β2 = 0.999, ε = 1e-8) with learning rate `lr / (1 + decay·t)`,
/// `t` counting batch updates from 1.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub time_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, time_decay: f64) -> Self {
        Adam { learning_rate, time_decay, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Effective learning rate at update `t` (1-based).
    pub fn rate_at(&self, t: u64) -> f64 {
        self.learning_rate / (1.0 + self.time_decay * t as f64)
    }

    pub fn step(&mut self, params: Vec<&mut Array2<f64>>, grads: &[Array2<f64>]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step;
        let lr = self.rate_at(t);
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            Zip::from(p).and(g).and(&mut self.m[k]).and(&mut self.v[k]).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}
