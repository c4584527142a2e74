//! What each CLI subcommand does. All read one [`Config`] and write a run manifest.

use std::path::PathBuf;

use super::config::Config;
use super::manifest::ManifestRecorder;
use crate::decision::truncate_prediction;
use crate::embeddings::{import_external_query_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{evaluate, run_experiment_suite, train_variant, write_trace, Dataset, Embeddings, EvalReport, SuiteReport, SweepRow, Variant};
use crate::predictors::{Checkpoint, ModelKind, PathPrediction, Predictor};
use crate::synth::generate_synthetic;

fn ensure_dir(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(file: &std::path::Path, value: &T) -> Result<()> {
    std::fs::write(file, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(file, e))
}

pub fn generate_data(cfg: &Config) -> Result<PathBuf> {
    let mut rec = ManifestRecorder::start("generate-data", cfg);
    let data = generate_synthetic(&cfg.synth, cfg.seed)?;
    rec.stage("generate");
    data.write_to(&cfg.data_dir)?;
    rec.stage("write");
    rec.output(&cfg.data_dir);
    rec.finish(&cfg.artifacts_dir)
}

const PRODUCTS_FILE: &str = "products.txt";
const TOKENS_FILE: &str = "tokens.txt";

pub fn train_embeddings(cfg: &Config) -> Result<Embeddings> {
    let mut rec = ManifestRecorder::start("train-embeddings", cfg);
    let data = Dataset::load(&cfg.data_dir, cfg.train_fraction)?;
    rec.stage("load");
    let emb = Embeddings::train(&data, &cfg.embeddings)?;
    rec.stage("train");
    let dir = cfg.embeddings_dir();
    ensure_dir(&dir)?;
    emb.products.save(dir.join(PRODUCTS_FILE))?;
    emb.tokens.save(dir.join(TOKENS_FILE))?;
    rec.output(&dir);
    rec.finish(&cfg.artifacts_dir)?;
    Ok(emb)
}

/// Saved tables plus the configured external query vectors.
pub fn load_embeddings(cfg: &Config) -> Result<Embeddings> {
    let dir = cfg.embeddings_dir();
    let external = cfg.external_query_embeddings.as_ref().map(import_external_query_embeddings).transpose()?;
    Ok(Embeddings {
        products: EmbeddingTable::load(dir.join(PRODUCTS_FILE))?,
        tokens: EmbeddingTable::load(dir.join(TOKENS_FILE))?,
        external,
    })
}

pub fn train(cfg: &Config, model: ModelKind) -> Result<PathBuf> {
    let mut rec = ManifestRecorder::start(&format!("train-{model}"), cfg);
    let data = Dataset::load(&cfg.data_dir, cfg.train_fraction)?;
    let emb = load_embeddings(cfg)?;
    rec.stage("load");
    let (predictor, history) = train_variant(cfg.variant(model), &data.split.train, &data.tree, &emb, &cfg.models, cfg.seed)?;
    rec.stage("train");
    ensure_dir(&cfg.models_dir())?;
    let file = cfg.checkpoint_path(model);
    let train_cfg = crate::nn::TrainConfig { seed: cfg.seed, ..cfg.models.train.clone() };
    Checkpoint::new(&model.to_string(), &data.tree, train_cfg, predictor).save(&file)?;
    rec.output(&file);
    if let Some(h) = history {
        let hfile = cfg.models_dir().join(format!("{model}-history.json"));
        write_json(&hfile, &h)?;
        rec.output(hfile);
    }
    rec.stage("save");
    rec.finish(&cfg.artifacts_dir)?;
    Ok(file)
}

fn load_checkpoint(cfg: &Config, data: &Dataset, model: ModelKind) -> Result<Predictor> {
    Ok(Checkpoint::<Predictor>::load(cfg.checkpoint_path(model), &data.tree)?.model)
}

/// Evaluates a saved checkpoint; writes the report and the per-event trace.
pub fn evaluate_checkpoint(cfg: &Config, model: ModelKind) -> Result<EvalReport> {
    let mut rec = ManifestRecorder::start(&format!("evaluate-{model}"), cfg);
    let data = Dataset::load(&cfg.data_dir, cfg.train_fraction)?;
    let predictor = load_checkpoint(cfg, &data, model)?;
    rec.stage("load");
    let (report, trace) = evaluate(&cfg.variant(model).label(), &predictor, &data.split, &data.tree, &cfg.sweep_cts)?;
    rec.stage("evaluate");
    ensure_dir(&cfg.eval_dir())?;
    let rfile = cfg.eval_dir().join(format!("{model}-report.json"));
    report.save(&rfile)?;
    write_trace(cfg.trace_path(model), &trace)?;
    rec.output(rfile);
    rec.output(cfg.trace_path(model));
    rec.finish(&cfg.artifacts_dir)?;
    Ok(report)
}

/// Retrains the given variants over fractions × seeds.
pub fn evaluate_suite(cfg: &Config, variants: Vec<Variant>, fractions: Vec<f64>) -> Result<SuiteReport> {
    let mut rec = ManifestRecorder::start("evaluate-suite", cfg);
    let data = Dataset::load(&cfg.data_dir, cfg.train_fraction)?;
    let emb = load_embeddings(cfg)?;
    rec.stage("load");
    let mut suite = cfg.suite_config();
    suite.variants = variants;
    suite.fractions = fractions;
    let report = run_experiment_suite(&data, &emb, &suite);
    rec.stage("suite");
    ensure_dir(&cfg.eval_dir())?;
    let file = cfg.eval_dir().join("suite.json");
    write_json(&file, &report)?;
    rec.output(file);
    rec.finish(&cfg.artifacts_dir)?;
    Ok(report)
}

pub fn sweep(cfg: &Config, model: ModelKind, cts: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rec = ManifestRecorder::start(&format!("sweep-{model}"), cfg);
    let data = Dataset::load(&cfg.data_dir, cfg.train_fraction)?;
    let predictor = load_checkpoint(cfg, &data, model)?;
    rec.stage("load");
    let (report, trace) = evaluate(&cfg.variant(model).label(), &predictor, &data.split, &data.tree, cts)?;
    rec.stage("sweep");
    ensure_dir(&cfg.eval_dir())?;
    let file = cfg.eval_dir().join(format!("{model}-sweep.json"));
    write_json(&file, &report.sweep)?;
    write_trace(cfg.trace_path(model), &trace)?;
    rec.output(file);
    rec.output(cfg.trace_path(model));
    rec.finish(&cfg.artifacts_dir)?;
    Ok(report.sweep)
}

pub struct OneShot {
    pub prediction: PathPrediction,
    pub path: crate::taxonomy::Path,
    pub ct: f64,
}

pub fn predict(cfg: &Config, model: ModelKind, query: &str, session: &[String], ct: Option<f64>) -> Result<OneShot> {
    let tree = crate::taxonomy::load_catalog(cfg.data_dir.join(crate::synth::CATALOG_FILE))?;
    let predictor = Checkpoint::<Predictor>::load(cfg.checkpoint_path(model), &tree)?.model;
    let prediction = predictor.predict(query, session)?;
    let ct = ct.unwrap_or(cfg.decision.ct);
    let path = truncate_prediction(&prediction, ct);
    Ok(OneShot { prediction, path, ct })
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut out = format!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>7}\n", "ct", "precision", "recall", "macro_p", "macro_r", "depth", "pareto");
    for r in rows {
        out.push_str(&format!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.3} {:>7}\n",
            r.ct,
            r.precision,
            r.recall,
            r.macro_precision,
            r.macro_recall,
            r.mean_depth,
            if r.pareto { "*" } else { "" }
        ));
    }
    out
}

pub fn format_report(r: &EvalReport) -> String {
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut out = format!("model {}  ({} test examples, {} events)\n", r.model, r.test_examples, r.test_events);
    out.push_str(&format!("{:<8} {:>8} {:>8} {:>8} {:>8}\n", "subset", "n", "D=1", "D=2", "D=last"));
    for (name, s) in [("overall", &r.accuracy.overall), ("seen", &r.accuracy.seen), ("unseen", &r.accuracy.unseen)] {
        out.push_str(&format!("{:<8} {:>8} {:>8} {:>8} {:>8}\n", name, s.examples, f(s.d1), f(s.d2), f(s.last)));
    }
    out.push_str(&format!("validity {} ({} of {})\n", f(r.validity.rate), r.validity.valid, r.validity.generated));
    out
}
