//! Two-category toy taxonomy shared by the SessionPath checks.

use facetpath::embeddings::{EmbeddingTable, QueryEncoder, TableKind};
use facetpath::eventlog::LabeledExample;
use facetpath::nn::{History, TrainConfig};
use facetpath::predictors::{Featurizer, SessionPathModel, SpArch};
use facetpath::taxonomy::{CatalogRow, Path, TaxonomyTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PRODUCTS: [(&str, &str); 6] =
    [("a1", "a/x"), ("a2", "a/x"), ("a3", "a/y"), ("b1", "b/z"), ("b2", "b/z"), ("b3", "b/w")];

pub fn tree() -> TaxonomyTree {
    TaxonomyTree::from_rows(PRODUCTS.iter().map(|(id, p)| CatalogRow {
        product_id: id.to_string(),
        path: p.split('/').map(String::from).collect(),
        description: String::new(),
    }))
    .unwrap()
}

pub fn featurizer(seed: u64) -> Featurizer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = EmbeddingTable::new(4, TableKind::QueryUnigram);
    for (t, v) in [("shoe", [1.0, 0.0, 0.0, 0.0]), ("lamp", [0.0, 1.0, 0.0, 0.0]), ("amb", [0.0, 0.0, 1.0, 0.0])] {
        q.insert(t, v.to_vec()).unwrap();
    }
    let mut p = EmbeddingTable::new(4, TableKind::Product);
    for (id, path) in PRODUCTS {
        let side = if path.starts_with('a') { 1.0 } else { -1.0 };
        let v = (0..4).map(|i| if i == 0 { side } else { rng.gen_range(-0.3..0.3) }).collect();
        p.insert(id, v).unwrap();
    }
    Featurizer::new(QueryEncoder::Search2Prod2Vec(q), p, true)
}

pub fn example(i: usize, query: &str, session: &[&str], target: &str) -> LabeledExample {
    let path = PRODUCTS.iter().find(|(id, _)| *id == target).unwrap().1;
    LabeledExample {
        event_id: format!("s{i}#0"),
        session_id: format!("s{i}"),
        timestamp: i as i64,
        session_products: session.iter().map(|s| s.to_string()).collect(),
        query: query.to_string(),
        target_product: target.to_string(),
        target_path: Path::parse(path),
        result_set: vec![target.to_string()],
        clicked: vec![target.to_string()],
    }
}

pub fn fit(data: &[LabeledExample], epochs: usize, seed: u64) -> (SessionPathModel, History) {
    let t = tree();
    SessionPathModel::train(data, featurizer(0), t.node_vocabulary(), t.max_depth(), SpArch::default(), &cfg(epochs, seed)).unwrap()
}

pub fn cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: 0.003, batch_size: 16, max_epochs: epochs, patience: epochs - 1, seed, ..TrainConfig::default() }
}

pub fn argmax(xs: &[f64]) -> usize {
    (0..xs.len()).fold(0, |best, i| if xs[i] > xs[best] { i } else { best })
}

pub fn two_path_toy() -> Vec<LabeledExample> {
    (0..50).map(|i| if i % 2 == 0 { example(i, "shoe", &[], "a1") } else { example(i, "lamp", &[], "b3") }).collect()
}

