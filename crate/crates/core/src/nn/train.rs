use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Adam;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub time_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.001, time_decay: 0.00001, batch_size: 128, max_epochs: 300, patience: 20, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.time_decay < 0.0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("learning rate, batch size and max epochs must be positive".into()));
        }
        if self.patience == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config("patience must be in 1..max_epochs".into()));
        }
        Ok(())
    }
}

/// A model trainable by [`train_loop`]. Gradients are returned in `params_mut` order.
pub trait Network: Clone {
    type Example;

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>>;

    /// Mean loss over `batch` and its parameter gradients.
    fn loss_and_grad(&self, batch: &[&Self::Example]) -> (f64, Vec<Array2<f64>>);

    /// Mean loss over `batch`.
    fn loss(&self, batch: &[&Self::Example]) -> f64;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub updates: u64,
}

fn mean_loss<N: Network>(model: &N, set: &[N::Example], chunk: usize) -> f64 {
    let refs: Vec<&N::Example> = set.iter().collect();
    let mut total = 0.0;
    for c in refs.chunks(chunk) {
        total += model.loss(c) * c.len() as f64;
    }
    total / set.len() as f64
}

/// Mini-batch Adam with early stopping on validation loss. The model is left
/// holding the parameters of the best validation epoch.
pub fn train_loop<N: Network>(model: &mut N, train: &[N::Example], valid: &[N::Example], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if valid.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_5ba7c4);
    let mut adam = Adam::new(cfg.learning_rate, cfg.time_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best = (f64::INFINITY, model.clone());
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&N::Example> = idx.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = model.loss_and_grad(&batch);
            epoch_loss += loss * batch.len() as f64;
            adam.step(model.params_mut(), &grads);
        }
        history.train_loss.push(epoch_loss / train.len() as f64);
        let v = mean_loss(model, valid, cfg.batch_size.max(256));
        history.valid_loss.push(v);
        tracing::debug!(epoch, train = history.train_loss[epoch - 1], valid = v, "epoch");
        if v < best.0 {
            best = (v, model.clone());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.updates = adam.steps();
    *model = best.1;
    Ok(history)
}
