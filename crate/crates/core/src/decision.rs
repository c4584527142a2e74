//! Gini confidence and the threshold rule that cuts generated paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::PathPrediction;
use crate::taxonomy::{Path, TaxonomyTree};

pub const DEFAULT_CT: f64 = 0.993;

/// Gini coefficient of a distribution, `Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄)`.
///
/// Evaluated through the sorted form `Σᵢ (2i − n − 1)·x₍ᵢ₎ / (n·Σx)`, which is
/// the same double sum with each pair counted once. Zero for uniform input,
/// `(n−1)/n` for one-hot.
pub fn gini(d: &[f64]) -> Result<f64> {
    let n = d.len();
    if n == 0 {
        return Err(Error::EmptyDistribution);
    }
    if n == 1 {
        return Ok(0.0);
    }
    let mut sorted = d.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let sum: f64 = sorted.iter().sum();
    if sum <= 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * (i + 1) as f64 - nf - 1.0) * x).sum();
    Ok(weighted / (nf * sum))
}

/// 1 ("add the node") iff `g ≥ ct`.
pub fn decision_rule(g: f64, ct: f64) -> u8 {
    u8::from(g >= ct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionConfig {
    pub ct: f64,
    /// Drop final paths that are not a prefix of any catalog path.
    pub safety_check: bool,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig { ct: DEFAULT_CT, safety_check: false }
    }
}

/// Longest prefix of the generated path whose every node passes the rule.
pub fn truncate_prediction(pred: &PathPrediction, ct: f64) -> Path {
    let keep = pred.step_gini.iter().take_while(|&&g| decision_rule(g, ct) == 1).count();
    pred.nodes.truncate(keep)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyStats {
    pub invalid: u64,
    pub dropped: u64,
}

/// Truncates, then counts (and optionally drops) catalog-invalid results.
pub fn decide(pred: &PathPrediction, cfg: &DecisionConfig, tree: &TaxonomyTree, stats: &mut SafetyStats) -> Path {
    let path = truncate_prediction(pred, cfg.ct);
    if !path.is_empty() && !tree.is_valid_path(&path) {
        stats.invalid += 1;
        if cfg.safety_check {
            stats.dropped += 1;
            return Path::empty();
        }
    }
    path
}
