//! SessionPath: a wide encoder over `[query ⧺ session]` whose dense state fills
//! the initial `h` and `c` of a single-layer LSTM decoder that emits taxonomy
//! nodes one at a time.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Featurizer, PathPrediction};
use crate::decision::gini;
use crate::error::Result;
use crate::eventlog::LabeledExample;
use crate::nn::{
    argmax, glorot, softmax_cross_entropy, softmax_rows, train_loop, Activation, DenseCache, DenseLayer, History,
    LstmGrads, LstmLayer, LstmStepCache, Network, TrainConfig,
};
use crate::taxonomy::{NodeId, NodeVocabulary, Path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpArch {
    pub encoder_width: usize,
    pub hidden: usize,
    pub token_dim: usize,
}

impl Default for SpArch {
    fn default() -> Self {
        SpArch { encoder_width: 256, hidden: 128, token_dim: 64 }
    }
}

/// Encoder features and the target node sequence (sentinels excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct SpExample {
    pub features: Vec<f64>,
    pub path: Vec<NodeId>,
}

impl SpExample {
    /// Decoder inputs `[START, n₁ … n_k]`.
    pub fn decoder_inputs(&self) -> Vec<NodeId> {
        std::iter::once(NodeId::START).chain(self.path.iter().copied()).collect()
    }

    /// Decoder targets `[n₁ … n_k, END]`.
    pub fn decoder_targets(&self) -> Vec<NodeId> {
        self.path.iter().copied().chain(std::iter::once(NodeId::END)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPathNet {
    pub encoder: DenseLayer,
    pub init_h: DenseLayer,
    pub init_c: DenseLayer,
    /// `(vocab, token_dim)`
    pub embedding: Array2<f64>,
    pub lstm: LstmLayer,
    pub output: DenseLayer,
}

struct StepTrace {
    tokens: Vec<usize>,
    lstm: LstmStepCache,
    out: DenseCache,
    dlogits: Array2<f64>,
}

impl SessionPathNet {
    pub fn new(input_dim: usize, vocab_size: usize, arch: SpArch, rng: &mut ChaCha8Rng) -> Self {
        SessionPathNet {
            encoder: DenseLayer::new(input_dim, arch.encoder_width, Activation::Tanh, rng),
            init_h: DenseLayer::new(arch.encoder_width, arch.hidden, Activation::Identity, rng),
            init_c: DenseLayer::new(arch.encoder_width, arch.hidden, Activation::Identity, rng),
            embedding: glorot(vocab_size, arch.token_dim, rng),
            lstm: LstmLayer::new(arch.token_dim, arch.hidden, rng),
            output: DenseLayer::new(arch.hidden, vocab_size, Activation::Identity, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        let mut v: Vec<&Array2<f64>> = Vec::with_capacity(12);
        v.extend(self.encoder.params());
        v.extend(self.init_h.params());
        v.extend(self.init_c.params());
        v.push(&self.embedding);
        v.extend(self.lstm.params());
        v.extend(self.output.params());
        v
    }

    fn embed(&self, tokens: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((tokens.len(), self.embedding.ncols()));
        for (mut row, &t) in x.rows_mut().into_iter().zip(tokens) {
            row.assign(&self.embedding.row(t));
        }
        x
    }

    fn stack(batch: &[&SpExample], dim: usize) -> Array2<f64> {
        let mut x = Array2::zeros((batch.len(), dim));
        for (mut row, ex) in x.rows_mut().into_iter().zip(batch) {
            row.assign(&ndarray::ArrayView1::from(&ex.features[..]));
        }
        x
    }

    /// Teacher-forced pass; returns the batch-mean of summed per-step
    /// cross-entropy and, if requested, gradients in `params` order.
    pub fn run(&self, batch: &[&SpExample], with_grad: bool) -> Result<(f64, Option<Vec<Array2<f64>>>)> {
        let b = batch.len();
        let x = Self::stack(batch, self.input_dim());
        let enc = self.encoder.forward(x.view())?;
        let h0 = self.init_h.forward(enc.output.view())?;
        let c0 = self.init_c.forward(enc.output.view())?;

        let inputs: Vec<Vec<NodeId>> = batch.iter().map(|e| e.decoder_inputs()).collect();
        let targets: Vec<Vec<NodeId>> = batch.iter().map(|e| e.decoder_targets()).collect();
        let steps = targets.iter().map(Vec::len).max().unwrap_or(0);
        let scale = 1.0 / b as f64;

        let mut h = h0.output.clone();
        let mut c = c0.output.clone();
        let mut total = 0.0;
        let mut trace = Vec::with_capacity(steps);
        for t in 0..steps {
            let tok: Vec<usize> = inputs.iter().map(|s| s.get(t).map_or(NodeId::END.index(), |n| n.index())).collect();
            let tgt: Vec<usize> = targets.iter().map(|s| s.get(t).map_or(0, |n| n.index())).collect();
            let w: Vec<f64> = targets.iter().map(|s| if t < s.len() { scale } else { 0.0 }).collect();
            let xt = self.embed(&tok);
            let (hn, cn, cache) = self.lstm.step(xt.view(), h.view(), c.view())?;
            let out = self.output.forward(hn.view())?;
            let (loss, dlogits, _) = softmax_cross_entropy(&out.output, &tgt, &w);
            total += loss;
            h = hn;
            c = cn;
            if with_grad {
                trace.push(StepTrace { tokens: tok, lstm: cache, out, dlogits });
            }
        }
        if !with_grad {
            return Ok((total, None));
        }

        let hd = self.lstm.hidden_dim();
        let mut g_out_w = Array2::zeros(self.output.weight.dim());
        let mut g_out_b = Array2::zeros(self.output.bias.dim());
        let mut g_emb = Array2::zeros(self.embedding.dim());
        let mut g_lstm = LstmGrads::zeros_like(&self.lstm);
        let mut dh_next = Array2::zeros((b, hd));
        let mut dc_next = Array2::zeros((b, hd));
        for st in trace.iter().rev() {
            let (dh_out, g) = self.output.backward(&st.out, st.dlogits.view())?;
            g_out_w += &g.weight;
            g_out_b += &g.bias;
            let dh = dh_out + &dh_next;
            let (dx, dh_prev, dc_prev) = self.lstm.step_backward(&st.lstm, dh.view(), dc_next.view(), &mut g_lstm);
            for (row, &tok) in dx.rows().into_iter().zip(&st.tokens) {
                let mut e = g_emb.row_mut(tok);
                e += &row;
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        let (d_enc_h, g_h) = self.init_h.backward(&h0, dh_next.view())?;
        let (d_enc_c, g_c) = self.init_c.backward(&c0, dc_next.view())?;
        let d_enc = d_enc_h + d_enc_c;
        let (_, g_enc) = self.encoder.backward(&enc, d_enc.view())?;
        let grads = vec![
            g_enc.weight,
            g_enc.bias,
            g_h.weight,
            g_h.bias,
            g_c.weight,
            g_c.bias,
            g_emb,
            g_lstm.w_input,
            g_lstm.w_hidden,
            g_lstm.bias,
            g_out_w,
            g_out_b,
        ];
        Ok((total, Some(grads)))
    }

    /// Greedy decoding for a batch of feature rows. Each row yields the emitted
    /// tokens with the distribution that produced them; a row stops at END (or
    /// START), or after `max_len` emitted nodes.
    pub fn generate(&self, features: ArrayView2<f64>, max_len: usize) -> Result<Vec<Vec<(NodeId, Vec<f64>)>>> {
        let b = features.nrows();
        let enc = self.encoder.forward(features)?;
        let mut h = self.init_h.forward(enc.output.view())?.output;
        let mut c = self.init_c.forward(enc.output.view())?.output;
        let mut tokens = vec![NodeId::START.index(); b];
        let mut done = vec![false; b];
        let mut out: Vec<Vec<(NodeId, Vec<f64>)>> = vec![Vec::new(); b];
        for _ in 0..max_len {
            let xt = self.embed(&tokens);
            let (hn, cn, _) = self.lstm.step(xt.view(), h.view(), c.view())?;
            let mut p = self.output.forward(hn.view())?.output;
            softmax_rows(&mut p);
            for r in 0..b {
                if done[r] {
                    continue;
                }
                let dist = p.row(r).to_vec();
                let next = argmax(&dist);
                let id = NodeId(next as u32);
                if id.is_sentinel() {
                    done[r] = true;
                } else {
                    out[r].push((id, dist));
                    tokens[r] = next;
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
            h = hn;
            c = cn;
        }
        Ok(out)
    }
}

impl Network for SessionPathNet {
    type Example = SpExample;

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v: Vec<&mut Array2<f64>> = Vec::with_capacity(12);
        v.extend(self.encoder.params_mut());
        v.extend(self.init_h.params_mut());
        v.extend(self.init_c.params_mut());
        v.push(&mut self.embedding);
        v.extend(self.lstm.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    fn loss_and_grad(&self, batch: &[&SpExample]) -> (f64, Vec<Array2<f64>>) {
        let (loss, grads) = self.run(batch, true).expect("feature width fixed at construction");
        (loss, grads.unwrap_or_default())
    }

    fn loss(&self, batch: &[&SpExample]) -> f64 {
        self.run(batch, false).expect("feature width fixed at construction").0
    }
}

/// A trained SessionPath predictor with everything needed to serve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPathModel {
    pub arch: SpArch,
    pub net: SessionPathNet,
    pub vocab: NodeVocabulary,
    pub featurizer: Featurizer,
    pub max_generation_length: usize,
}

impl SessionPathModel {
    pub fn examples(&self, data: &[LabeledExample]) -> Vec<SpExample> {
        to_examples(&self.featurizer, &self.vocab, data)
    }

    /// Trains on `train`, holding out its chronologically last 10% for early stopping.
    pub fn train(
        train: &[LabeledExample],
        featurizer: Featurizer,
        vocab: NodeVocabulary,
        max_depth: usize,
        arch: SpArch,
        cfg: &TrainConfig,
    ) -> Result<(Self, History)> {
        let mut sorted = train.to_vec();
        sorted.sort_by_key(|e| e.timestamp);
        let examples = to_examples(&featurizer, &vocab, &sorted);
        let n_valid = (examples.len() / 10).max(1).min(examples.len().saturating_sub(1));
        let (fit, valid) = examples.split_at(examples.len() - n_valid);
        Self::train_split(fit, valid, featurizer, vocab, max_depth, arch, cfg)
    }

    /// Trains with an explicit validation set.
    pub fn train_split(
        fit: &[SpExample],
        valid: &[SpExample],
        featurizer: Featurizer,
        vocab: NodeVocabulary,
        max_depth: usize,
        arch: SpArch,
        cfg: &TrainConfig,
    ) -> Result<(Self, History)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = SessionPathNet::new(featurizer.dim(), vocab.len(), arch, &mut rng);
        let history = train_loop(&mut net, fit, valid, cfg)?;
        Ok((SessionPathModel { arch, net, vocab, featurizer, max_generation_length: max_depth + 1 }, history))
    }

    pub fn generate<S: AsRef<str>>(&self, query: &str, session_products: &[S]) -> Result<PathPrediction> {
        let f = self.featurizer.features(query, session_products);
        Ok(self.generate_features(&[f])?.remove(0))
    }

    /// Batched greedy generation over precomputed feature rows.
    pub fn generate_features(&self, rows: &[Vec<f64>]) -> Result<Vec<PathPrediction>> {
        let dim = self.featurizer.dim();
        let mut x = Array2::zeros((rows.len(), dim));
        for (mut r, f) in x.rows_mut().into_iter().zip(rows) {
            if f.len() != dim {
                return Err(crate::Error::shape(dim, f.len()));
            }
            r.assign(&ndarray::ArrayView1::from(&f[..]));
        }
        let raw = self.net.generate(x.view(), self.max_generation_length)?;
        raw.into_iter().map(|steps| self.to_prediction(steps)).collect()
    }

    fn to_prediction(&self, steps: Vec<(NodeId, Vec<f64>)>) -> Result<PathPrediction> {
        let mut nodes = Path::empty();
        let mut dists = Vec::with_capacity(steps.len());
        let mut ginis = Vec::with_capacity(steps.len());
        for (id, dist) in steps {
            let node = self.vocab.node(id).expect("non-sentinel id inside vocabulary");
            nodes.push(node.label.clone());
            ginis.push(gini(&dist)?);
            dists.push(dist);
        }
        Ok(PathPrediction { nodes, step_distributions: dists, step_gini: ginis })
    }
}

pub(crate) fn to_examples(featurizer: &Featurizer, vocab: &NodeVocabulary, data: &[LabeledExample]) -> Vec<SpExample> {
    data.iter()
        .map(|ex| SpExample {
            features: featurizer.features(&ex.query, &ex.session_products),
            path: vocab.encode(&ex.target_path).expect("target path nodes come from the catalog vocabulary"),
        })
        .collect()
}
