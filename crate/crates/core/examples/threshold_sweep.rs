//! Precision/recall across confidence thresholds, from one cached pass of predictions.
//!
//! cargo run --release --example threshold_sweep

use facetpath::app::commands::format_sweep;
use facetpath::embeddings::SkipGramConfig;
use facetpath::eval::{group_events, sweep_thresholds, train_variant, Dataset, Embeddings, EncoderKind, ModelSettings, Variant};
use facetpath::predictors::ModelKind;
use facetpath::synth::{generate_synthetic, SynthConfig};

fn main() -> facetpath::Result<()> {
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let emb = Embeddings::train(&ds, &SkipGramConfig::default())?;
    let mut settings = ModelSettings::default();
    settings.train.learning_rate = 0.003;
    settings.train.max_epochs = 60;
    settings.train.patience = 8;
    let (model, _) = train_variant(Variant::new(ModelKind::Mlp, EncoderKind::S2pv, true), &ds.split.train, &ds.tree, &emb, &settings, 0)?;

    let events = group_events(&ds.split.test);
    let pairs: Vec<(&str, &[String])> = events.iter().map(|e| (e.query.as_str(), e.session_products.as_slice())).collect();
    let preds = model.predict_pairs(&pairs)?;
    let mut ginis: Vec<f64> = preds.iter().filter_map(|p| p.step_gini.first().copied()).collect();
    ginis.sort_by(f64::total_cmp);
    let q = |f: f64| ginis[((ginis.len() - 1) as f64 * f) as usize];
    let cts = [0.0, q(0.1), q(0.25), q(0.5), q(0.75), q(0.9), 1.0];
    println!("{} test events; thresholds at gini quantiles\n", events.len());
    print!("{}", format_sweep(&sweep_thresholds(&events, &preds, &cts, &ds.tree)));
    Ok(())
}
