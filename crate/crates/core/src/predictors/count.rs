use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::LabeledExample;
use crate::taxonomy::Path;
use crate::text::normalize_query;

pub const CM_THRESHOLD: f64 = 0.8;

/// Query → path click shares. Every distinct full path is its own label;
/// `sport` and `sport/basketball` are unrelated classes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub threshold: f64,
    pub shares: BTreeMap<String, BTreeMap<Path, f64>>,
    /// The in-memory serving map: normalized query → deepest qualifying path.
    pub predictions: BTreeMap<String, Path>,
}

impl CountModel {
    pub fn train(train: &[LabeledExample]) -> Self {
        Self::train_with_threshold(train, CM_THRESHOLD)
    }

    pub fn train_with_threshold(train: &[LabeledExample], threshold: f64) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<Path, f64>> = BTreeMap::new();
        for ex in train {
            *counts.entry(normalize_query(&ex.query)).or_default().entry(ex.target_path.clone()).or_insert(0.0) += 1.0;
        }
        let mut predictions = BTreeMap::new();
        for (q, by_path) in counts.iter_mut() {
            let total: f64 = by_path.values().sum();
            by_path.values_mut().for_each(|c| *c /= total);
            // deepest first, then larger share, then lexicographic
            let best = by_path
                .iter()
                .filter(|(_, &s)| s >= threshold)
                .min_by(|a, b| b.0.depth().cmp(&a.0.depth()).then(b.1.total_cmp(a.1)).then(a.0.cmp(b.0)));
            if let Some((p, _)) = best {
                predictions.insert(q.clone(), p.clone());
            }
        }
        CountModel { threshold, shares: counts, predictions }
    }

    /// Exact lookup of the normalized query; unseen or unqualified queries get nothing.
    pub fn predict(&self, query: &str) -> Option<&Path> {
        self.predictions.get(&normalize_query(query))
    }

    pub fn share(&self, query: &str, path: &Path) -> Option<f64> {
        self.shares.get(&normalize_query(query))?.get(path).copied()
    }

    pub fn save(&self, file: impl AsRef<FsPath>) -> Result<()> {
        let file = file.as_ref();
        std::fs::write(file, serde_json::to_vec(self)?).map_err(|e| Error::io(file, e))
    }

    pub fn load(file: impl AsRef<FsPath>) -> Result<Self> {
        let file = file.as_ref();
        let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clicks(q: &str, path: &str, n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|_| LabeledExample {
                event_id: String::new(),
                session_id: String::new(),
                timestamp: 0,
                session_products: vec![],
                query: q.into(),
                target_product: String::new(),
                target_path: Path::parse(path),
                result_set: vec![],
                clicked: vec![],
            })
            .collect()
    }

    #[test]
    fn ninety_percent_path_qualifies() {
        let mut train = clicks("q", "a/b/c", 9);
        train.extend(clicks("q", "x/y", 1));
        let cm = CountModel::train(&train);
        assert!((cm.share("q", &Path::parse("a/b/c")).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(cm.predict("q"), Some(&Path::parse("a/b/c")));
    }

    #[test]
    fn even_split_has_no_prediction() {
        let mut train = clicks("q", "a/b", 5);
        train.extend(clicks("q", "a/c", 5));
        assert_eq!(CountModel::train(&train).predict("q"), None);
    }

    #[test]
    fn prefixes_are_disjoint_labels() {
        // "sport" does not inherit the clicks of "sport/basketball"
        let mut train = clicks("q", "sport", 3);
        train.extend(clicks("q", "sport/basketball", 1));
        let cm = CountModel::train(&train);
        assert_eq!(cm.share("q", &Path::parse("sport")), Some(0.75));
        assert_eq!(cm.predict("q"), None);
        let mut train = clicks("r", "sport", 9);
        train.extend(clicks("r", "sport/basketball", 1));
        assert_eq!(CountModel::train(&train).predict("r"), Some(&Path::parse("sport")));
    }

    #[test]
    fn deepest_then_share_then_lexicographic() {
        let mut train = clicks("q", "a", 4);
        train.extend(clicks("q", "b/c", 3));
        train.extend(clicks("q", "b/d", 3));
        let cm = CountModel::train_with_threshold(&train, 0.25);
        assert_eq!(cm.predict("q"), Some(&Path::parse("b/c")));
        train.extend(clicks("q", "b/d", 1));
        let cm = CountModel::train_with_threshold(&train, 0.25);
        assert_eq!(cm.predict("q"), Some(&Path::parse("b/d")));
    }

    #[test]
    fn lookup_normalizes_query() {
        let cm = CountModel::train(&clicks("nike shoes", "a/b", 2));
        assert!(cm.predict("  Nike   SHOES").is_some());
        assert!(cm.predict("adidas").is_none());
    }

    #[test]
    fn shares_sum_to_one() {
        let mut train = clicks("q", "a", 3);
        train.extend(clicks("q", "b", 4));
        train.extend(clicks("q", "c/d", 2));
        let cm = CountModel::train(&train);
        assert!((cm.shares["q"].values().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
