//! The augmentation service over freshly trained count and MLP models.
//! Without arguments it sends a few requests in-process; with an address it listens.
//!
//! cargo run --release --example serve -- [127.0.0.1:8080]

use std::collections::BTreeMap;

use facetpath::app::service::{router, AppState, ArtifactSet, AugmentRequest};
use facetpath::app::ServiceConfig;
use facetpath::embeddings::SkipGramConfig;
use facetpath::eval::{evaluate, train_variant, Dataset, Embeddings, EncoderKind, ModelSettings, Variant, DEFAULT_SWEEP};
use facetpath::predictors::ModelKind;
use facetpath::synth::{generate_synthetic, SynthConfig};

#[tokio::main]
async fn main() -> facetpath::Result<()> {
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let emb = Embeddings::train(&ds, &SkipGramConfig::default())?;
    let mut settings = ModelSettings::default();
    settings.train.learning_rate = 0.003;
    settings.train.max_epochs = 40;
    settings.train.patience = 8;
    let mut models = BTreeMap::new();
    for v in [Variant::CM, Variant::new(ModelKind::Mlp, EncoderKind::S2pv, true)] {
        models.insert(v.model, train_variant(v, &ds.split.train, &ds.tree, &emb, &settings, 0)?.0);
    }
    let (_, trace) = evaluate("mlp", &models[&ModelKind::Mlp], &ds.split, &ds.tree, &DEFAULT_SWEEP)?;

    let mut cfg = ServiceConfig { default_model: ModelKind::Mlp, ..ServiceConfig::default() };
    if let Some(addr) = std::env::args().nth(1) {
        cfg.addr = addr.parse().map_err(|e| facetpath::Error::Config(format!("{e}")))?;
    }
    let state = AppState::new(cfg.clone());
    state.install(ArtifactSet {
        tree: ds.tree.clone(),
        models,
        default_model: ModelKind::Mlp,
        default_ct: 0.0,
        trace: Some(trace),
        sweep_cts: DEFAULT_SWEEP.to_vec(),
    });

    if std::env::args().nth(1).is_some() {
        let listener = tokio::net::TcpListener::bind(cfg.addr).await.map_err(facetpath::Error::Net)?;
        println!("listening on {}", cfg.addr);
        axum::serve(listener, router(state)).await.map_err(facetpath::Error::Net)?;
        return Ok(());
    }

    let ex = &ds.split.test[0];
    for model in [ModelKind::Cm, ModelKind::Mlp, ModelKind::Mlp] {
        let req = AugmentRequest {
            session_products: ex.session_products.clone(),
            candidates: vec![ex.query.clone(), "premium".into()],
            ct_override: None,
            model: Some(model),
        };
        let resp = state.augment(&req).expect("artifacts installed");
        println!("{}", serde_json::to_string(&resp)?);
    }
    print!("\n{}", state.metrics.render());
    Ok(())
}
