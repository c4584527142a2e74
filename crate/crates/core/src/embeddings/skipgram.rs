//! Skip-gram with negative sampling over symbol sequences (sessions or descriptions).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::{EmbeddingTable, TableKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 50, window: 5, negatives: 5, epochs: 10, min_count: 1, learning_rate: 0.025, seed: 0 }
    }
}

/// Noise distribution proportional to count^0.75.
struct NoiseSampler {
    cdf: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        for x in cdf.iter_mut() {
            *x /= acc;
        }
        NoiseSampler { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Trains input vectors with SGNS; deterministic for a fixed seed.
pub fn train_skipgram<S: AsRef<str>>(corpus: &[Vec<S>], cfg: &SkipGramConfig, kind: TableKind) -> Result<EmbeddingTable> {
    if cfg.dim < 2 {
        return Err(Error::Config("skip-gram dim must be at least 2".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for s in seq {
            *counts.entry(s.as_ref()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= cfg.min_count.max(1)).collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
    let sequences: Vec<Vec<usize>> =
        corpus.iter().map(|seq| seq.iter().filter_map(|s| index.get(s.as_ref()).copied()).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.dim;
    let n = vocab.len();
    let mut input: Vec<f64> = (0..n * dim).map(|_| (rng.gen::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0f64; n * dim];
    let noise = NoiseSampler::new(&vocab.iter().map(|v| v.1).collect::<Vec<_>>());

    let tokens_per_epoch: usize = sequences.iter().map(Vec::len).sum();
    let total = (tokens_per_epoch * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut grad = vec![0.0f64; dim];

    for _ in 0..cfg.epochs {
        for seq in &sequences {
            for (pos, &center) in seq.iter().enumerate() {
                let lr = (cfg.learning_rate * (1.0 - processed as f64 / total)).max(cfg.learning_rate * 1e-4);
                processed += 1;
                let reach = rng.gen_range(1..=cfg.window.max(1));
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(seq.len() - 1);
                for (ctx_pos, &context) in seq.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let v_in = center * dim;
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let v_out = target * dim;
                        let dot: f64 = (0..dim).map(|d| input[v_in + d] * output[v_out + d]).sum();
                        let g = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            grad[d] += g * output[v_out + d];
                            output[v_out + d] += g * input[v_in + d];
                        }
                    }
                    for d in 0..dim {
                        input[v_in + d] += grad[d];
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::new(dim, kind);
    for (i, (sym, _)) in vocab.iter().enumerate() {
        table.insert(*sym, input[i * dim..(i + 1) * dim].to_vec())?;
    }
    Ok(table)
}
