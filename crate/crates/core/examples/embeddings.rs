//! Product embeddings from sessions, then Search2Prod2Vec query vectors that
//! also cover queries never seen in training.
//!
//! cargo run --release --example embeddings

use facetpath::embeddings::{build_search2prod2vec, query_vector_s2pv, session_vector, SkipGramConfig, UnigramWeighting};
use facetpath::eval::{Dataset, Embeddings};
use facetpath::synth::{generate_synthetic, SynthConfig};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn main() -> facetpath::Result<()> {
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let emb = Embeddings::train(&ds, &SkipGramConfig::default())?;
    println!("{} product vectors, {} token vectors, dim {}", emb.products.len(), emb.tokens.len(), emb.products.dim());

    // nearest products to the first one, with their paths
    let (anchor, v) = emb.products.iter().next().unwrap();
    let mut near: Vec<(f64, &String)> = emb.products.iter().filter(|(k, _)| *k != anchor).map(|(k, w)| (cosine(v, w), k)).collect();
    near.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("\nneighbours of {anchor} ({}):", ds.tree.path_of(anchor).unwrap());
    for (c, k) in near.iter().take(5) {
        println!("  {k}  {c:.3}  {}", ds.tree.path_of(k).unwrap());
    }

    let unigrams = build_search2prod2vec(&ds.split.train, &emb.products, UnigramWeighting::Clicks)?;
    println!("\nSearch2Prod2Vec: {} unigram vectors", unigrams.len());
    let test = &ds.split.test[ds.split.unseen_test[0]];
    let q = query_vector_s2pv(&test.query, &unigrams);
    let s = session_vector(&test.session_products, &emb.products);
    println!(
        "unseen query {:?}: token coverage {:.2}, cosine to its session {:.3}, target {}",
        test.query,
        q.coverage,
        cosine(&q.values, &s.values),
        test.target_path
    );
    Ok(())
}
