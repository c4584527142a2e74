//! Analytic gradients vs central finite differences (ε = 1e-5). Each check returns its max relative error.

use facetpath::nn::{Activation, DenseLayer, LstmGrads, LstmLayer, Network};
use facetpath::predictors::{MlpArch, MlpNet, SessionPathNet, SpArch, SpExample};
use facetpath::taxonomy::NodeId;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{max_rel_error, numeric_grad};

const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub const CHECKS: [(&str, fn() -> f64); 5] = [
    ("dense", dense_layers),
    ("lstm", lstm_through_time),
    ("encoder-decoder", sessionpath_encoder_decoder),
    ("mlp", mlp_classifier),
    ("softmax-ce", softmax_cross_entropy),
];

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

fn dense_loss(layer: &DenseLayer, x: &Array2<f64>, r: &Array2<f64>) -> f64 {
    (layer.forward(x.view()).unwrap().output * r).sum()
}

pub fn dense_layers() -> f64 {
    let mut worst: f64 = 0.0;
    for (seed, act) in [Activation::Identity, Activation::Tanh, Activation::Relu, Activation::Softmax].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let mut layer = DenseLayer::new(3, 4, act, &mut rng);
        layer.bias = random(1, 4, &mut rng);
        let x = random(5, 3, &mut rng);
        let r = random(5, 4, &mut rng);
        let cache = layer.forward(x.view()).unwrap();
        let (dx, grads) = layer.backward(&cache, r.view()).unwrap();

        let mut w = layer.weight.clone();
        let nw = numeric_grad(&mut w, EPS, |w| dense_loss(&DenseLayer { weight: w.clone(), ..layer.clone() }, &x, &r));
        let mut b = layer.bias.clone();
        let nb = numeric_grad(&mut b, EPS, |b| dense_loss(&DenseLayer { bias: b.clone(), ..layer.clone() }, &x, &r));
        let nx = numeric_grad(&mut x.clone(), EPS, |x| dense_loss(&layer, x, &r));
        worst = worst.max(max_rel_error(&grads.weight, &nw)).max(max_rel_error(&grads.bias, &nb)).max(max_rel_error(&dx, &nx));
    }
    worst
}

/// Three LSTM steps; loss is a fixed linear functional of every h and the final c.
fn lstm_loss(layer: &LstmLayer, xs: &[Array2<f64>], h0: &Array2<f64>, c0: &Array2<f64>, rh: &[Array2<f64>], rc: &Array2<f64>) -> f64 {
    let (mut h, mut c) = (h0.clone(), c0.clone());
    let mut loss = 0.0;
    for (x, r) in xs.iter().zip(rh) {
        let (hn, cn, _) = layer.step(x.view(), h.view(), c.view()).unwrap();
        loss += (&hn * r).sum();
        h = hn;
        c = cn;
    }
    loss + (&c * rc).sum()
}

pub fn lstm_through_time() -> f64 {
    let (b, input, hidden, steps) = (2, 3, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut layer = LstmLayer::new(input, hidden, &mut rng);
    layer.bias = random(1, 4 * hidden, &mut rng);
    let xs: Vec<_> = (0..steps).map(|_| random(b, input, &mut rng)).collect();
    let h0 = random(b, hidden, &mut rng);
    let c0 = random(b, hidden, &mut rng);
    let rh: Vec<_> = (0..steps).map(|_| random(b, hidden, &mut rng)).collect();
    let rc = random(b, hidden, &mut rng);

    let (mut h, mut c) = (h0.clone(), c0.clone());
    let mut caches = Vec::new();
    for x in &xs {
        let (hn, cn, cache) = layer.step(x.view(), h.view(), c.view()).unwrap();
        caches.push(cache);
        h = hn;
        c = cn;
    }
    let mut grads = LstmGrads::zeros_like(&layer);
    let mut dh_next = Array2::zeros((b, hidden));
    let mut dc_next = rc.clone();
    let mut dxs = vec![Array2::zeros((b, input)); steps];
    for t in (0..steps).rev() {
        let dh = &rh[t] + &dh_next;
        let (dx, dh_prev, dc_prev) = layer.step_backward(&caches[t], dh.view(), dc_next.view(), &mut grads);
        dxs[t] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    let f = |l: &LstmLayer| lstm_loss(l, &xs, &h0, &c0, &rh, &rc);
    let n_wi = numeric_grad(&mut layer.w_input.clone(), EPS, |w| f(&LstmLayer { w_input: w.clone(), ..layer.clone() }));
    let n_wh = numeric_grad(&mut layer.w_hidden.clone(), EPS, |w| f(&LstmLayer { w_hidden: w.clone(), ..layer.clone() }));
    let n_b = numeric_grad(&mut layer.bias.clone(), EPS, |w| f(&LstmLayer { bias: w.clone(), ..layer.clone() }));
    let mut worst = max_rel_error(&grads.w_input, &n_wi).max(max_rel_error(&grads.w_hidden, &n_wh)).max(max_rel_error(&grads.bias, &n_b));

    let n_h0 = numeric_grad(&mut h0.clone(), EPS, |h| lstm_loss(&layer, &xs, h, &c0, &rh, &rc));
    let n_c0 = numeric_grad(&mut c0.clone(), EPS, |c| lstm_loss(&layer, &xs, &h0, c, &rh, &rc));
    worst = worst.max(max_rel_error(&dh_next, &n_h0)).max(max_rel_error(&dc_next, &n_c0));
    let mut x0 = xs[0].clone();
    let n_x0 = numeric_grad(&mut x0, EPS, |x| {
        let mut v = xs.clone();
        v[0] = x.clone();
        lstm_loss(&layer, &v, &h0, &c0, &rh, &rc)
    });
    worst.max(max_rel_error(&dxs[0], &n_x0))
}

fn check_network<N: Network>(net: &N, batch: &[&N::Example]) -> f64 {
    let (_, analytic) = net.loss_and_grad(batch);
    let mut probe = net.clone();
    let n_params = probe.params_mut().len();
    assert_eq!(n_params, analytic.len());
    let mut worst: f64 = 0.0;
    for k in 0..n_params {
        let mut p = probe.params_mut()[k].clone();
        let numeric = numeric_grad(&mut p, EPS, |value| {
            let mut m = net.clone();
            *m.params_mut()[k] = value.clone();
            m.loss(batch)
        });
        worst = worst.max(max_rel_error(&analytic[k], &numeric));
    }
    worst
}

pub fn sessionpath_encoder_decoder() -> f64 {
    let mut worst: f64 = 0.0;
    // vocabulary: START, END, a@1, b@2  (single path a/b), plus variable lengths in the batch
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let arch = SpArch { encoder_width: 5, hidden: 4, token_dim: 3 };
        let mut net = SessionPathNet::new(6, 4, arch, &mut rng);
        net.init_h.bias = random(1, 4, &mut rng);
        let examples: Vec<SpExample> = [vec![NodeId(2), NodeId(3)], vec![NodeId(2)], vec![NodeId(2), NodeId(3)]]
            .into_iter()
            .map(|path| SpExample { features: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), path })
            .collect();
        let refs: Vec<&SpExample> = examples.iter().collect();
        worst = worst.max(check_network(&net, &refs));
    }
    worst
}

pub fn mlp_classifier() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = MlpNet::new(3, 2, MlpArch { hidden: 4 }, &mut rng);
    let examples: Vec<(Vec<f64>, usize)> =
        (0..4).map(|i| ((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(), i % 2)).collect();
    let refs: Vec<&(Vec<f64>, usize)> = examples.iter().collect();
    check_network(&net, &refs)
}

pub fn softmax_cross_entropy() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let logits = random(3, 5, &mut rng);
    let targets = [1, 4, 0];
    let w = [1.0, 0.5, 1.0];
    let (_, d, _) = facetpath::nn::softmax_cross_entropy(&logits, &targets, &w);
    let n = numeric_grad(&mut logits.clone(), EPS, |z| facetpath::nn::softmax_cross_entropy(z, &targets, &w).0);
    let worst = max_rel_error(&d, &n);

    // and the standalone form on a normalized distribution
    let mut z = random(1, 4, &mut rng);
    let p = {
        let mut p = z.clone();
        facetpath::nn::softmax_rows(&mut p);
        p
    };
    let ce = facetpath::nn::cross_entropy(p.row(0), 2);
    let n = numeric_grad(&mut z, EPS, |z| {
        let mut p = z.clone();
        facetpath::nn::softmax_rows(&mut p);
        -p[[0, 2]].ln()
    });
    let analytic = Array2::from_shape_vec((1, 4), ce.grad).unwrap();
    worst.max(max_rel_error(&analytic, &n))
}
