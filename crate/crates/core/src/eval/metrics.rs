use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::decision::truncate_prediction;
use crate::eventlog::LabeledExample;
use crate::predictors::PathPrediction;
use crate::taxonomy::{Path, ProductId, TaxonomyTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Depth {
    At(usize),
    Last,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    /// `None` when no example is deep enough to be scored.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

pub fn is_correct(predicted: &Path, target: &Path, k: Depth) -> Option<bool> {
    match k {
        Depth::Last => Some(predicted == target),
        Depth::At(k) if target.depth() < k => None,
        Depth::At(k) => Some(predicted.depth() >= k && predicted.labels()[..k] == target.labels()[..k]),
    }
}

/// Predictions aligned with examples; an empty prediction is a miss.
pub fn accuracy_at_depth<'a>(pairs: impl IntoIterator<Item = (&'a Path, &'a LabeledExample)>, k: Depth) -> Accuracy {
    let mut acc = Accuracy::default();
    for (p, ex) in pairs {
        if let Some(ok) = is_correct(p, &ex.target_path, k) {
            acc.total += 1;
            acc.correct += usize::from(ok);
        }
    }
    acc
}

/// A test search event: the examples sharing one event id, collapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEvent {
    pub event_id: String,
    pub timestamp: i64,
    pub query: String,
    pub session_products: Vec<ProductId>,
    pub result_set: Vec<ProductId>,
    pub clicked: Vec<ProductId>,
}

/// Groups examples by event id, ordered by (timestamp, event id).
pub fn group_events(examples: &[LabeledExample]) -> Vec<SearchEvent> {
    let mut by_id: BTreeMap<&str, SearchEvent> = BTreeMap::new();
    for ex in examples {
        by_id.entry(&ex.event_id).or_insert_with(|| SearchEvent {
            event_id: ex.event_id.clone(),
            timestamp: ex.timestamp,
            query: ex.query.clone(),
            session_products: ex.session_products.clone(),
            result_set: ex.result_set.clone(),
            clicked: ex.clicked.clone(),
        });
    }
    let mut events: Vec<SearchEvent> = by_id.into_values().collect();
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.event_id.cmp(&b.event_id)));
    events
}

/// Paths of the clicked products.
pub fn golden_truth_set(event: &SearchEvent, tree: &TaxonomyTree) -> BTreeSet<Path> {
    event.clicked.iter().filter_map(|p| tree.path_of(p).cloned()).collect()
}

/// Result-set products whose path extends the prediction; the whole set when it is empty.
pub fn filtered_result_set<'a>(event: &'a SearchEvent, predicted: &Path, tree: &TaxonomyTree) -> Vec<&'a ProductId> {
    event
        .result_set
        .iter()
        .filter(|p| predicted.is_empty() || tree.path_of(p).is_some_and(|path| predicted.is_prefix_of(path)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EventOutcome {
    /// Undefined when the filter removed every product.
    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }

    /// Undefined when no result-set product matches the truth set.
    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }
}

/// Log-replay precision/recall for one event, with path-level truth matching:
/// any result-set product sharing a clicked product's path is relevant.
pub fn simulate_event(event: &SearchEvent, predicted: &Path, tree: &TaxonomyTree) -> EventOutcome {
    let truth = golden_truth_set(event, tree);
    let relevant = |p: &ProductId| tree.path_of(p).is_some_and(|path| truth.contains(path));
    let kept: BTreeSet<&ProductId> = filtered_result_set(event, predicted, tree).into_iter().collect();
    let mut out = EventOutcome::default();
    for p in &event.result_set {
        match (kept.contains(p), relevant(p)) {
            (true, true) => out.tp += 1,
            (true, false) => out.fp += 1,
            (false, true) => out.fn_ += 1,
            (false, false) => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ct: f64,
    /// Micro-averaged over events.
    pub precision: f64,
    pub recall: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub mean_depth: f64,
    pub events: usize,
    /// Events whose filtered set came out empty: skipped for precision, recall 0.
    pub empty_filtered: usize,
    /// Events with no relevant product in the result set, excluded entirely.
    pub no_truth: usize,
    pub pareto: bool,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One row per threshold, reusing cached predictions; only the truncation is redone.
pub fn sweep_thresholds(
    events: &[SearchEvent],
    predictions: &[PathPrediction],
    cts: &[f64],
    tree: &TaxonomyTree,
) -> Vec<SweepRow> {
    assert_eq!(events.len(), predictions.len(), "one prediction per event");
    let mut rows: Vec<SweepRow> = cts
        .iter()
        .map(|&ct| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            let (mut precisions, mut recalls, mut depths) = (Vec::new(), Vec::new(), Vec::new());
            let (mut empty_filtered, mut no_truth, mut n) = (0, 0, 0);
            for (ev, pred) in events.iter().zip(predictions) {
                let path = truncate_prediction(pred, ct);
                let o = simulate_event(ev, &path, tree);
                let Some(r) = o.recall() else {
                    no_truth += 1;
                    continue;
                };
                n += 1;
                depths.push(path.depth() as f64);
                tp += o.tp;
                fp += o.fp;
                fn_ += o.fn_;
                recalls.push(r);
                match o.precision() {
                    Some(p) => precisions.push(p),
                    None => empty_filtered += 1,
                }
            }
            SweepRow {
                ct,
                precision: if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 },
                recall: if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 },
                macro_precision: mean(&precisions),
                macro_recall: mean(&recalls),
                mean_depth: mean(&depths),
                events: n,
                empty_filtered,
                no_truth,
                pareto: false,
            }
        })
        .collect();
    mark_pareto(&mut rows);
    rows
}

/// Flags rows not dominated in (precision, recall).
pub fn mark_pareto(rows: &mut [SweepRow]) {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.precision, r.recall)).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        let (p, r) = points[i];
        row.pareto = !points.iter().any(|&(q, s)| q >= p && s >= r && (q > p || s > r));
    }
}

/// Per-event record of everything the threshold explorer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    pub event: SearchEvent,
    pub generated: Path,
    pub step_gini: Vec<f64>,
    pub truncations: Vec<Truncation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub ct: f64,
    pub path: Path,
}

impl EventTrace {
    pub fn new(event: SearchEvent, pred: &PathPrediction, cts: &[f64]) -> Self {
        EventTrace {
            event,
            generated: pred.nodes.clone(),
            step_gini: pred.step_gini.clone(),
            truncations: cts.iter().map(|&ct| Truncation { ct, path: truncate_prediction(pred, ct) }).collect(),
        }
    }

    /// The cached prediction; distributions are not kept in the trace.
    pub fn prediction(&self) -> PathPrediction {
        PathPrediction {
            nodes: self.generated.clone(),
            step_distributions: vec![Vec::new(); self.generated.depth()],
            step_gini: self.step_gini.clone(),
        }
    }
}

/// Sweep recomputed from a trace file.
pub fn sweep_from_trace(trace: &[EventTrace], cts: &[f64], tree: &TaxonomyTree) -> Vec<SweepRow> {
    let events: Vec<SearchEvent> = trace.iter().map(|t| t.event.clone()).collect();
    let preds: Vec<PathPrediction> = trace.iter().map(EventTrace::prediction).collect();
    sweep_thresholds(&events, &preds, cts, tree)
}
