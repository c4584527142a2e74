//! One-out-of-many classifier over every full catalog path seen in training.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Featurizer, PathPrediction};
use crate::decision::gini;
use crate::error::{Error, Result};
use crate::eventlog::LabeledExample;
use crate::nn::{argmax, softmax_cross_entropy, softmax_rows, train_loop, Activation, DenseLayer, History, Network, TrainConfig};
use crate::taxonomy::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpArch {
    pub hidden: usize,
}

impl Default for MlpArch {
    fn default() -> Self {
        MlpArch { hidden: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl MlpNet {
    pub fn new(input: usize, labels: usize, arch: MlpArch, rng: &mut ChaCha8Rng) -> Self {
        MlpNet {
            hidden: DenseLayer::new(input, arch.hidden, Activation::Relu, rng),
            output: DenseLayer::new(arch.hidden, labels, Activation::Identity, rng),
        }
    }

    fn stack(batch: &[&(Vec<f64>, usize)], dim: usize) -> Array2<f64> {
        let mut x = Array2::zeros((batch.len(), dim));
        for (mut row, ex) in x.rows_mut().into_iter().zip(batch) {
            row.assign(&ndarray::ArrayView1::from(&ex.0[..]));
        }
        x
    }

    pub fn run(&self, batch: &[&(Vec<f64>, usize)], with_grad: bool) -> Result<(f64, Option<Vec<Array2<f64>>>)> {
        let x = Self::stack(batch, self.hidden.input_dim());
        let h = self.hidden.forward(x.view())?;
        let o = self.output.forward(h.output.view())?;
        let targets: Vec<usize> = batch.iter().map(|e| e.1).collect();
        let w = vec![1.0 / batch.len() as f64; batch.len()];
        let (loss, dlogits, _) = softmax_cross_entropy(&o.output, &targets, &w);
        if !with_grad {
            return Ok((loss, None));
        }
        let (dh, g_out) = self.output.backward(&o, dlogits.view())?;
        let (_, g_hid) = self.hidden.backward(&h, dh.view())?;
        Ok((loss, Some(vec![g_hid.weight, g_hid.bias, g_out.weight, g_out.bias])))
    }

    /// Label distributions for feature rows.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let h = self.hidden.forward(x.view())?;
        let mut o = self.output.forward(h.output.view())?.output;
        softmax_rows(&mut o);
        Ok(o)
    }
}

impl Network for MlpNet {
    type Example = (Vec<f64>, usize);

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v: Vec<&mut Array2<f64>> = Vec::with_capacity(4);
        v.extend(self.hidden.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    fn loss_and_grad(&self, batch: &[&Self::Example]) -> (f64, Vec<Array2<f64>>) {
        let (l, g) = self.run(batch, true).expect("feature width fixed at construction");
        (l, g.unwrap_or_default())
    }

    fn loss(&self, batch: &[&Self::Example]) -> f64 {
        self.run(batch, false).expect("feature width fixed at construction").0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: MlpArch,
    pub net: MlpNet,
    /// Frozen label set: distinct full target paths of the training data, sorted.
    pub labels: Vec<Path>,
    pub featurizer: Featurizer,
}

impl MlpModel {
    pub fn label_index(&self) -> BTreeMap<&Path, usize> {
        self.labels.iter().enumerate().map(|(i, p)| (p, i)).collect()
    }

    /// Trains on `train`, holding out its chronologically last 10% for early stopping.
    pub fn train(train: &[LabeledExample], featurizer: Featurizer, arch: MlpArch, cfg: &TrainConfig) -> Result<(Self, History)> {
        if train.len() < 2 {
            return Err(Error::EmptyTraining);
        }
        let mut sorted = train.to_vec();
        sorted.sort_by_key(|e| e.timestamp);
        let labels: Vec<Path> =
            sorted.iter().map(|e| e.target_path.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<&Path, usize> = labels.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let examples: Vec<(Vec<f64>, usize)> = sorted
            .iter()
            .map(|e| (featurizer.features(&e.query, &e.session_products), index[&e.target_path]))
            .collect();
        let n_valid = (examples.len() / 10).max(1);
        let (fit, valid) = examples.split_at(examples.len() - n_valid);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = MlpNet::new(featurizer.dim(), labels.len(), arch, &mut rng);
        let history = train_loop(&mut net, fit, valid, cfg)?;
        Ok((MlpModel { arch, net, labels, featurizer }, history))
    }

    pub fn predict<S: AsRef<str>>(&self, query: &str, session_products: &[S]) -> Result<PathPrediction> {
        let f = self.featurizer.features(query, session_products);
        Ok(self.predict_features(&[f])?.remove(0))
    }

    /// The argmax label, with its single distribution (and Gini) repeated at every depth.
    pub fn predict_features(&self, rows: &[Vec<f64>]) -> Result<Vec<PathPrediction>> {
        let dim = self.featurizer.dim();
        let mut x = Array2::zeros((rows.len(), dim));
        for (mut r, f) in x.rows_mut().into_iter().zip(rows) {
            if f.len() != dim {
                return Err(Error::shape(dim, f.len()));
            }
            r.assign(&ndarray::ArrayView1::from(&f[..]));
        }
        let p = self.net.predict_proba(&x)?;
        p.rows()
            .into_iter()
            .map(|row| {
                let dist = row.to_vec();
                let label = self.labels[argmax(&dist)].clone();
                let g = gini(&dist)?;
                let depth = label.depth();
                Ok(PathPrediction { nodes: label, step_distributions: vec![dist; depth], step_gini: vec![g; depth] })
            })
            .collect()
    }
}
