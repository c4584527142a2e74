//! Product/token embeddings and the pooled session and query encoders.

mod skipgram;
mod table;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use skipgram::{train_skipgram, SkipGramConfig};
pub use table::{import_external_query_embeddings, EmbeddingTable, TableKind};

use crate::error::Result;
use crate::eventlog::{EventKind, LabeledExample, SessionEvent};
use crate::taxonomy::TaxonomyTree;
use crate::text::{normalize_query, tokenize};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionVector {
    pub values: Vec<f64>,
    pub is_empty_session: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector {
    pub values: Vec<f64>,
    /// Fraction of query tokens (or of the whole query) found in the table.
    pub coverage: f64,
}

/// Mean of the known products' embeddings; zeros when none is known.
/// Summed in sorted order, so any permutation gives bit-identical output.
pub fn session_vector<S: AsRef<str>>(session_products: &[S], table: &EmbeddingTable) -> SessionVector {
    let mut keys: Vec<&str> = session_products.iter().map(AsRef::as_ref).collect();
    keys.sort_unstable();
    match table.mean_of(keys).0 {
        Some(values) => SessionVector { values, is_empty_session: false },
        None => SessionVector { values: vec![0.0; table.dim()], is_empty_session: true },
    }
}

fn pooled_tokens(query: &str, table: &EmbeddingTable) -> QueryVector {
    let tokens = tokenize(query);
    let (mean, hits, total) = table.mean_of(tokens.iter().map(String::as_str));
    match mean {
        Some(values) => QueryVector { values, coverage: hits as f64 / total as f64 },
        None => QueryVector { values: vec![0.0; table.dim()], coverage: 0.0 },
    }
}

/// Average of description-token embeddings.
pub fn query_vector_word2vec(query: &str, token_table: &EmbeddingTable) -> QueryVector {
    pooled_tokens(query, token_table)
}

/// Average of Search2Prod2Vec unigram vectors.
pub fn query_vector_s2pv(query: &str, unigram_table: &EmbeddingTable) -> QueryVector {
    pooled_tokens(query, unigram_table)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnigramWeighting {
    /// Each query weighted by its total click count.
    #[default]
    Clicks,
    Uniform,
}

/// Click-weighted mean of clicked-product embeddings per normalized query,
/// returned with the query's total in-vocabulary click weight.
pub fn click_query_vectors(
    train: &[LabeledExample],
    product_table: &EmbeddingTable,
) -> BTreeMap<String, (Vec<f64>, f64)> {
    let mut clicks: BTreeMap<String, BTreeMap<&str, f64>> = BTreeMap::new();
    for ex in train {
        if product_table.contains(&ex.target_product) {
            *clicks.entry(normalize_query(&ex.query)).or_default().entry(ex.target_product.as_str()).or_insert(0.0) +=
                1.0;
        }
    }
    clicks
        .into_iter()
        .map(|(q, by_product)| {
            let mut v = vec![0.0; product_table.dim()];
            let mut w_total = 0.0;
            for (p, w) in by_product {
                w_total += w;
                for (acc, x) in v.iter_mut().zip(product_table.get(p).unwrap()) {
                    *acc += w * x;
                }
            }
            v.iter_mut().for_each(|x| *x /= w_total);
            (q, (v, w_total))
        })
        .collect()
}

/// Unigram table: each token is the (click-)weighted mean of the query vectors
/// of the training queries containing it.
pub fn build_search2prod2vec(
    train: &[LabeledExample],
    product_table: &EmbeddingTable,
    weighting: UnigramWeighting,
) -> Result<EmbeddingTable> {
    let queries = click_query_vectors(train, product_table);
    let dim = product_table.dim();
    let mut acc: BTreeMap<String, (Vec<f64>, f64)> = BTreeMap::new();
    for (q, (v, clicks)) in &queries {
        let w = match weighting {
            UnigramWeighting::Clicks => *clicks,
            UnigramWeighting::Uniform => 1.0,
        };
        let mut tokens = tokenize(q);
        tokens.sort();
        tokens.dedup();
        for t in tokens {
            let e = acc.entry(t).or_insert_with(|| (vec![0.0; dim], 0.0));
            for (a, x) in e.0.iter_mut().zip(v) {
                *a += w * x;
            }
            e.1 += w;
        }
    }
    let mut table = EmbeddingTable::new(dim, TableKind::QueryUnigram);
    for (t, (mut v, w)) in acc {
        v.iter_mut().for_each(|x| *x /= w);
        table.insert(t, v)?;
    }
    Ok(table)
}

/// Query encoders usable by the neural predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "table", rename_all = "snake_case")]
pub enum QueryEncoder {
    Word2Vec(EmbeddingTable),
    Search2Prod2Vec(EmbeddingTable),
    /// Whole-query vectors keyed by normalized query; unknown queries encode to zeros.
    External(EmbeddingTable),
}

impl QueryEncoder {
    pub fn dim(&self) -> usize {
        self.table().dim()
    }

    pub fn table(&self) -> &EmbeddingTable {
        match self {
            QueryEncoder::Word2Vec(t) | QueryEncoder::Search2Prod2Vec(t) | QueryEncoder::External(t) => t,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QueryEncoder::Word2Vec(_) => "w2v",
            QueryEncoder::Search2Prod2Vec(_) => "s2pv",
            QueryEncoder::External(_) => "external",
        }
    }

    pub fn encode(&self, query: &str) -> QueryVector {
        match self {
            QueryEncoder::Word2Vec(t) => query_vector_word2vec(query, t),
            QueryEncoder::Search2Prod2Vec(t) => query_vector_s2pv(query, t),
            QueryEncoder::External(t) => match t.get(&normalize_query(query)) {
                Some(v) => QueryVector { values: v.to_vec(), coverage: 1.0 },
                None => QueryVector { values: vec![0.0; t.dim()], coverage: 0.0 },
            },
        }
    }
}

/// Per-session product sequences from view events, in time order.
pub fn session_corpus(events: &[SessionEvent]) -> Vec<Vec<String>> {
    let mut by_session: Vec<(String, Vec<(i64, String)>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::View) {
        let i = *index.entry(e.session_id.as_str()).or_insert_with(|| {
            by_session.push((e.session_id.clone(), Vec::new()));
            by_session.len() - 1
        });
        by_session[i].1.push((e.timestamp, e.product_id.clone().unwrap_or_default()));
    }
    by_session
        .into_iter()
        .map(|(_, mut v)| {
            v.sort_by_key(|x| x.0);
            v.into_iter().map(|x| x.1).collect()
        })
        .collect()
}

/// Tokenized product descriptions, in product-id order.
pub fn description_corpus(tree: &TaxonomyTree) -> Vec<Vec<String>> {
    tree.products().into_iter().map(|(id, _)| tokenize(tree.description_of(id).unwrap_or_default())).collect()
}
