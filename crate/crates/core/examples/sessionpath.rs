//! Train SessionPath and watch the same query resolve differently under two sessions.
//!
//! cargo run --release --example sessionpath -- [max_epochs]

use facetpath::embeddings::SkipGramConfig;
use facetpath::eval::{evaluate, train_variant, Dataset, Embeddings, EncoderKind, ModelSettings, Variant, DEFAULT_SWEEP};
use facetpath::predictors::{ModelKind, Predictor};
use facetpath::synth::{generate_synthetic, SynthConfig};

fn main() -> facetpath::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let emb = Embeddings::train(&ds, &SkipGramConfig::default())?;

    let mut settings = ModelSettings::default();
    settings.train.max_epochs = epochs;
    settings.train.patience = 8.min(epochs - 1);
    settings.train.learning_rate = 0.003;
    let variant = Variant::new(ModelKind::Sessionpath, EncoderKind::S2pv, true);
    let (model, history) = train_variant(variant, &ds.split.train, &ds.tree, &emb, &settings, 0)?;
    let h = history.unwrap();
    println!("trained {} epochs, best {} (valid loss {:.4})", h.valid_loss.len(), h.best_epoch, h.valid_loss[h.best_epoch - 1]);

    let (report, _) = evaluate(&variant.label(), &model, &ds.split, &ds.tree, &DEFAULT_SWEEP)?;
    let a = &report.accuracy.overall;
    println!("accuracy D=1 {:.3}  D=2 {:.3}  D=last {:.3}", a.d1.unwrap(), a.d2.unwrap(), a.last.unwrap());

    // a brand query issued from sessions in two different top-level categories
    let Predictor::Sessionpath(sp) = &model else { unreachable!() };
    let brand = data.catalog[0].description.split(' ').nth(1).unwrap().to_string();
    let by_top = |top: &str| -> Vec<String> {
        data.catalog.iter().filter(|r| r.path[0] == top).take(4).map(|r| r.product_id.clone()).collect()
    };
    let tops: Vec<String> = ds.tree.children(&facetpath::taxonomy::Path::empty()).unwrap().iter().cloned().collect();
    for top in tops.iter().take(3) {
        let session = by_top(top);
        let p = sp.generate(&brand, &session)?;
        println!("query {brand:?} with a {top} session → {}  gini {:.3?}", p.nodes, p.step_gini);
    }
    let empty: [&str; 0] = [];
    println!("query {brand:?} with no session → {}", sp.generate(&brand, &empty)?.nodes);
    Ok(())
}
