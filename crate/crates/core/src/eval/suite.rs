use std::path::Path as FsPath;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    accuracy_at_depth, group_events, sweep_thresholds, Depth, EventTrace, SearchEvent, SweepRow,
};
use crate::decision::{truncate_prediction, DEFAULT_CT};
use crate::embeddings::{
    build_search2prod2vec, description_corpus, session_corpus, train_skipgram, EmbeddingTable, QueryEncoder,
    SkipGramConfig, TableKind, UnigramWeighting,
};
use crate::error::{Error, Result};
use crate::eventlog::{
    build_examples, chronological_split, ingest, ingest_events, BuildReport, DatasetSplit, IngestReport, LabeledExample,
    SessionEvent,
};
use crate::nn::{History, TrainConfig};
use crate::predictors::{CountModel, Featurizer, MlpArch, MlpModel, ModelKind, Predictor, SessionPathModel, SpArch};
use crate::synth::{SyntheticData, CATALOG_FILE, EVENTS_FILE};
use crate::taxonomy::{load_catalog, TaxonomyTree};
use crate::text::tokenize;

/// Catalog, cleaned events, labeled examples and the chronological split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub tree: TaxonomyTree,
    pub events: Vec<SessionEvent>,
    pub examples: Vec<LabeledExample>,
    pub split: DatasetSplit,
    pub ingest: IngestReport,
    pub build: BuildReport,
}

impl Dataset {
    pub fn new(tree: TaxonomyTree, raw_events: Vec<SessionEvent>, train_fraction: f64) -> Result<Self> {
        let (events, ingest) = ingest_events(raw_events, &tree);
        Self::from_clean(tree, events, ingest, train_fraction)
    }

    fn from_clean(tree: TaxonomyTree, events: Vec<SessionEvent>, ingest: IngestReport, train_fraction: f64) -> Result<Self> {
        let (examples, build) = build_examples(&events, &tree);
        let split = chronological_split(&examples, train_fraction)?;
        Ok(Dataset { tree, events, examples, split, ingest, build })
    }

    pub fn from_synthetic(data: &SyntheticData, train_fraction: f64) -> Result<Self> {
        Self::new(TaxonomyTree::from_rows(data.catalog.clone())?, data.events.clone(), train_fraction)
    }

    /// Reads `catalog.jsonl` and `events.jsonl` from a data directory.
    pub fn load(dir: impl AsRef<FsPath>, train_fraction: f64) -> Result<Self> {
        let dir = dir.as_ref();
        let tree = load_catalog(dir.join(CATALOG_FILE))?;
        let (events, ingest) = ingest(dir.join(EVENTS_FILE), &tree)?;
        Self::from_clean(tree, events, ingest, train_fraction)
    }

    /// Events strictly before the split boundary.
    pub fn train_period_events(&self) -> Vec<SessionEvent> {
        self.events.iter().filter(|e| e.timestamp < self.split.split_boundary).cloned().collect()
    }
}

/// Product and token tables shared by every variant of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    pub products: EmbeddingTable,
    pub tokens: EmbeddingTable,
    pub external: Option<EmbeddingTable>,
}

impl Embeddings {
    /// prod2vec over train-period view sessions; word2vec over product
    /// descriptions plus training queries.
    pub fn train(data: &Dataset, cfg: &SkipGramConfig) -> Result<Self> {
        let products = train_skipgram(&session_corpus(&data.train_period_events()), cfg, TableKind::Product)?;
        let mut text = description_corpus(&data.tree);
        text.extend(data.split.train.iter().map(|e| tokenize(&e.query)));
        let tokens = train_skipgram(&text, cfg, TableKind::Token)?;
        Ok(Embeddings { products, tokens, external: None })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    #[default]
    S2pv,
    Word2vec,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub model: ModelKind,
    #[serde(default)]
    pub encoder: EncoderKind,
    #[serde(default = "yes")]
    pub session: bool,
}

fn yes() -> bool {
    true
}

impl Variant {
    pub const CM: Variant = Variant { model: ModelKind::Cm, encoder: EncoderKind::S2pv, session: false };

    pub fn new(model: ModelKind, encoder: EncoderKind, session: bool) -> Self {
        Variant { model, encoder, session }
    }

    pub fn label(&self) -> String {
        if self.model == ModelKind::Cm {
            return "cm".into();
        }
        let enc = match self.encoder {
            EncoderKind::S2pv => "s2pv",
            EncoderKind::Word2vec => "w2v",
            EncoderKind::External => "external",
        };
        let model = if self.model == ModelKind::Sessionpath { "sp" } else { "mlp" };
        format!("{model}+{enc}{}", if self.session { "" } else { "-nosession" })
    }
}

/// Shared settings for training any predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub train: TrainConfig,
    pub sessionpath: SpArch,
    pub mlp: MlpArch,
    pub s2pv_weighting: UnigramWeighting,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            train: TrainConfig::default(),
            sessionpath: SpArch::default(),
            mlp: MlpArch::default(),
            s2pv_weighting: UnigramWeighting::Clicks,
        }
    }
}

pub fn query_encoder(kind: EncoderKind, train: &[LabeledExample], emb: &Embeddings, weighting: UnigramWeighting) -> Result<QueryEncoder> {
    Ok(match kind {
        EncoderKind::S2pv => QueryEncoder::Search2Prod2Vec(build_search2prod2vec(train, &emb.products, weighting)?),
        EncoderKind::Word2vec => QueryEncoder::Word2Vec(emb.tokens.clone()),
        EncoderKind::External => {
            QueryEncoder::External(emb.external.clone().ok_or_else(|| Error::Config("no external query embeddings loaded".into()))?)
        }
    })
}

/// Trains one variant; the seed drives initialization and shuffling.
pub fn train_variant(
    variant: Variant,
    train: &[LabeledExample],
    tree: &TaxonomyTree,
    emb: &Embeddings,
    settings: &ModelSettings,
    seed: u64,
) -> Result<(Predictor, Option<History>)> {
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if variant.model == ModelKind::Cm {
        return Ok((Predictor::Cm(CountModel::train(train)), None));
    }
    let query = query_encoder(variant.encoder, train, emb, settings.s2pv_weighting)?;
    let featurizer = Featurizer::new(query, emb.products.clone(), variant.session);
    let cfg = TrainConfig { seed, ..settings.train.clone() };
    Ok(match variant.model {
        ModelKind::Mlp => {
            let (m, h) = MlpModel::train(train, featurizer, settings.mlp, &cfg)?;
            (Predictor::Mlp(m), Some(h))
        }
        _ => {
            let (m, h) =
                SessionPathModel::train(train, featurizer, tree.node_vocabulary(), tree.max_depth(), settings.sessionpath, &cfg)?;
            (Predictor::Sessionpath(m), Some(h))
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthScores {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub last: Option<f64>,
    pub examples: usize,
}

impl DepthScores {
    fn of(pairs: &[(&crate::taxonomy::Path, &LabeledExample)]) -> Self {
        let rate = |k| accuracy_at_depth(pairs.iter().copied(), k).rate();
        DepthScores { d1: rate(Depth::At(1)), d2: rate(Depth::At(2)), last: rate(Depth::Last), examples: pairs.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: DepthScores,
    pub seen: DepthScores,
    pub unseen: DepthScores,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    /// Non-empty generated paths.
    pub generated: usize,
    pub valid: usize,
    pub rate: Option<f64>,
    /// Same, after truncation at the default threshold.
    pub truncated_generated: usize,
    pub truncated_valid: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub predict_ms: f64,
    pub per_event_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub test_examples: usize,
    pub test_events: usize,
    pub accuracy: AccuracyReport,
    pub sweep: Vec<SweepRow>,
    pub validity: Validity,
    pub runtime: Runtime,
}

impl EvalReport {
    /// The report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        EvalReport { runtime: Runtime::default(), ..self.clone() }
    }

    pub fn save(&self, file: impl AsRef<FsPath>) -> Result<()> {
        let file = file.as_ref();
        std::fs::write(file, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(file, e))
    }
}

pub const DEFAULT_SWEEP: [f64; 9] = [0.0, 0.9, 0.95, 0.97, 0.98, 0.99, 0.993, 0.996, 1.0];

/// Predictions per test event, then accuracy, sweep, validity and the trace.
pub fn evaluate(
    label: &str,
    predictor: &Predictor,
    split: &DatasetSplit,
    tree: &TaxonomyTree,
    cts: &[f64],
) -> Result<(EvalReport, Vec<EventTrace>)> {
    let events = group_events(&split.test);
    let started = Instant::now();
    let pairs: Vec<(&str, &[String])> = events.iter().map(|e| (e.query.as_str(), e.session_products.as_slice())).collect();
    let predictions = predictor.predict_pairs(&pairs)?;
    let predict_ms = started.elapsed().as_secs_f64() * 1e3;

    let index: std::collections::HashMap<&str, usize> =
        events.iter().enumerate().map(|(i, e)| (e.event_id.as_str(), i)).collect();
    let per_example: Vec<&crate::taxonomy::Path> =
        split.test.iter().map(|ex| &predictions[index[ex.event_id.as_str()]].nodes).collect();
    let all: Vec<_> = per_example.iter().copied().zip(&split.test).collect();
    let mut seen = Vec::new();
    let mut unseen = Vec::new();
    for (i, pair) in all.iter().enumerate() {
        if split.is_unseen(i) {
            unseen.push(*pair);
        } else {
            seen.push(*pair);
        }
    }
    let accuracy = AccuracyReport {
        overall: DepthScores::of(&all),
        seen: DepthScores::of(&seen),
        unseen: DepthScores::of(&unseen),
    };

    let mut validity = Validity::default();
    for p in &predictions {
        if !p.nodes.is_empty() {
            validity.generated += 1;
            validity.valid += usize::from(tree.is_valid_path(&p.nodes));
        }
        let cut = truncate_prediction(p, DEFAULT_CT);
        if !cut.is_empty() {
            validity.truncated_generated += 1;
            validity.truncated_valid += usize::from(tree.is_valid_path(&cut));
        }
    }
    validity.rate = (validity.generated > 0).then(|| validity.valid as f64 / validity.generated as f64);

    let sweep = sweep_thresholds(&events, &predictions, cts, tree);
    let n_events = events.len();
    let trace = events.into_iter().zip(&predictions).map(|(e, p)| EventTrace::new(e, p, cts)).collect();
    let report = EvalReport {
        model: label.to_string(),
        test_examples: split.test.len(),
        test_events: n_events,
        accuracy,
        sweep,
        validity,
        runtime: Runtime { predict_ms, per_event_us: if n_events > 0 { predict_ms * 1e3 / n_events as f64 } else { 0.0 } },
    };
    Ok((report, trace))
}

pub fn write_trace(file: impl AsRef<FsPath>, trace: &[EventTrace]) -> Result<()> {
    let file = file.as_ref();
    let mut out = String::new();
    for t in trace {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    std::fs::write(file, out).map_err(|e| Error::io(file, e))
}

pub fn read_trace(file: impl AsRef<FsPath>) -> Result<Vec<EventTrace>> {
    let file = file.as_ref();
    let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub variants: Vec<Variant>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub cts: Vec<f64>,
    pub models: ModelSettings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            variants: vec![
                Variant::CM,
                Variant::new(ModelKind::Mlp, EncoderKind::S2pv, true),
                Variant::new(ModelKind::Sessionpath, EncoderKind::S2pv, true),
                Variant::new(ModelKind::Sessionpath, EncoderKind::S2pv, false),
            ],
            fractions: vec![0.1, 0.25, 1.0],
            seeds: (0..5).collect(),
            cts: DEFAULT_SWEEP.to_vec(),
            models: ModelSettings::default(),
        }
    }
}

/// Mean over seeds; the SD is shown only when it reaches 0.01.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub sd_reported: Option<f64>,
    pub n: usize,
}

impl Stat {
    /// Sample standard deviation (n − 1); zero for a single value.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Some(Stat { mean, sd, sd_reported: (sd >= 0.01).then_some(sd), n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub train_examples: usize,
    pub train_ms: f64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub overall_d1: Option<Stat>,
    pub overall_d2: Option<Stat>,
    pub overall_last: Option<Stat>,
    pub seen_last: Option<Stat>,
    pub unseen_d1: Option<Stat>,
    pub unseen_last: Option<Stat>,
    pub validity: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCell {
    pub variant: Variant,
    pub label: String,
    pub fraction: f64,
    pub failed: bool,
    pub runs: Vec<SeedRun>,
    pub summary: CellSummary,
}

impl SuiteCell {
    fn summarize(&mut self) {
        let reports: Vec<&EvalReport> = self.runs.iter().filter_map(|r| r.report.as_ref()).collect();
        let stat = |f: &dyn Fn(&EvalReport) -> Option<f64>| Stat::of(&reports.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
        self.summary = CellSummary {
            overall_d1: stat(&|r| r.accuracy.overall.d1),
            overall_d2: stat(&|r| r.accuracy.overall.d2),
            overall_last: stat(&|r| r.accuracy.overall.last),
            seen_last: stat(&|r| r.accuracy.seen.last),
            unseen_d1: stat(&|r| r.accuracy.unseen.d1),
            unseen_last: stat(&|r| r.accuracy.unseen.last),
            validity: stat(&|r| r.validity.rate),
        };
        self.failed = self.runs.iter().any(|r| r.error.is_some());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub cells: Vec<SuiteCell>,
}

impl SuiteReport {
    pub fn cell(&self, variant: Variant, fraction: f64) -> Option<&SuiteCell> {
        self.cells.iter().find(|c| c.variant == variant && c.fraction == fraction)
    }

    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for run in r.cells.iter_mut().flat_map(|c| c.runs.iter_mut()) {
            run.train_ms = 0.0;
            run.report = run.report.as_ref().map(EvalReport::without_timings);
        }
        r
    }

    /// Table-shaped text: one line per (variant, fraction).
    pub fn to_table(&self) -> String {
        let fmt = |s: &Option<Stat>| match s {
            None => "-".to_string(),
            Some(s) => match s.sd_reported {
                Some(sd) => format!("{:.3} ± {:.3}", s.mean, sd),
                None => format!("{:.3}", s.mean),
            },
        };
        let mut out = format!(
            "{:<22} {:>8} {:>15} {:>15} {:>15} {:>15} {:>15}\n",
            "model", "fraction", "D=1", "D=2", "D=last", "seen D=last", "unseen D=last"
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{:<22} {:>8} {:>15} {:>15} {:>15} {:>15} {:>15}{}\n",
                c.label,
                c.fraction,
                fmt(&c.summary.overall_d1),
                fmt(&c.summary.overall_d2),
                fmt(&c.summary.overall_last),
                fmt(&c.summary.seen_last),
                fmt(&c.summary.unseen_last),
                if c.failed { "  FAILED" } else { "" }
            ));
        }
        out
    }
}

/// Every variant × fraction × seed. A failing run marks its cell and the suite moves on.
pub fn run_experiment_suite(data: &Dataset, emb: &Embeddings, cfg: &SuiteConfig) -> SuiteReport {
    let splits: Vec<DatasetSplit> = cfg
        .fractions
        .iter()
        .map(|&f| if f >= 1.0 { data.split.clone() } else { data.split.with_train_fraction(f) })
        .collect();
    let jobs: Vec<(usize, Variant, u64)> = (0..cfg.fractions.len())
        .flat_map(|fi| cfg.variants.iter().flat_map(move |&v| cfg.seeds.iter().map(move |&s| (fi, v, s))))
        .collect();
    // independent single-threaded runs, so results do not depend on scheduling
    let mut runs: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(fi, variant, seed)| {
            let (split, fraction, label) = (&splits[fi], cfg.fractions[fi], variant.label());
            let started = Instant::now();
            let outcome = train_variant(variant, &split.train, &data.tree, emb, &cfg.models, seed)
                .map(|(p, _)| (started.elapsed().as_secs_f64() * 1e3, p))
                .and_then(|(ms, p)| Ok((ms, evaluate(&label, &p, split, &data.tree, &cfg.cts)?.0)));
            match outcome {
                Ok((train_ms, report)) => {
                    tracing::info!(model = %label, fraction, seed, train_ms, last = ?report.accuracy.overall.last, "run done");
                    SeedRun { seed, train_examples: split.train.len(), train_ms, report: Some(report), error: None }
                }
                Err(e) => {
                    tracing::warn!(model = %label, fraction, seed, error = %e, "run failed");
                    SeedRun { seed, train_examples: split.train.len(), train_ms: 0.0, report: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let mut cells = Vec::new();
    for &fraction in &cfg.fractions {
        for &variant in &cfg.variants {
            let runs = (0..cfg.seeds.len()).map(|_| runs.pop().expect("one run per job")).collect();
            let mut cell = SuiteCell { variant, label: variant.label(), fraction, failed: false, runs, summary: CellSummary::default() };
            cell.summarize();
            cells.push(cell);
        }
    }
    SuiteReport { config: cfg.clone(), cells }
}

pub fn events_of(split: &DatasetSplit) -> Vec<SearchEvent> {
    group_events(&split.test)
}
