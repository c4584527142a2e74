//! Several models over training fractions and seeds, reported as mean (± SD).
//!
//! cargo run --release --example experiment_suite -- [n_seeds]

use facetpath::embeddings::SkipGramConfig;
use facetpath::eval::{run_experiment_suite, Dataset, Embeddings, EncoderKind, SuiteConfig, Variant};
use facetpath::predictors::ModelKind;
use facetpath::synth::{generate_synthetic, SynthConfig};

fn main() -> facetpath::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2u64);
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let emb = Embeddings::train(&ds, &SkipGramConfig::default())?;
    let mut cfg = SuiteConfig {
        variants: vec![Variant::CM, Variant::new(ModelKind::Mlp, EncoderKind::S2pv, true), Variant::new(ModelKind::Mlp, EncoderKind::Word2vec, true)],
        fractions: vec![0.1, 0.25, 1.0],
        seeds: (0..seeds).collect(),
        ..SuiteConfig::default()
    };
    cfg.models.train.learning_rate = 0.003;
    cfg.models.train.max_epochs = 60;
    cfg.models.train.patience = 8;
    print!("{}", run_experiment_suite(&ds, &emb, &cfg).to_table());
    Ok(())
}
