//! Clickstream events, supervised example construction and the time-based split.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Path, ProductId, TaxonomyTree};
use crate::text::normalize_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    View,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session_id: String,
    pub timestamp: i64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_id: Option<ProductId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_set: Option<Vec<ProductId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clicked: Option<Vec<ProductId>>,
}

impl SessionEvent {
    pub fn view(session_id: impl Into<String>, timestamp: i64, product: impl Into<String>) -> Self {
        SessionEvent {
            session_id: session_id.into(),
            timestamp,
            kind: EventKind::View,
            product_id: Some(product.into()),
            query: None,
            result_set: None,
            clicked: None,
        }
    }

    pub fn search(
        session_id: impl Into<String>,
        timestamp: i64,
        query: impl Into<String>,
        result_set: Vec<ProductId>,
        clicked: Vec<ProductId>,
    ) -> Self {
        SessionEvent {
            session_id: session_id.into(),
            timestamp,
            kind: EventKind::Search,
            product_id: None,
            query: Some(query.into()),
            result_set: Some(result_set),
            clicked: Some(clicked),
        }
    }

    /// Structural invariant check; the reason string is used for reject accounting.
    pub fn check(&self) -> std::result::Result<(), &'static str> {
        match self.kind {
            EventKind::View => {
                if self.product_id.is_none() {
                    return Err("view without product_id");
                }
                if self.query.is_some() {
                    return Err("view carrying a query");
                }
            }
            EventKind::Search => {
                let (Some(_), Some(rs), Some(clicked)) = (&self.query, &self.result_set, &self.clicked) else {
                    return Err("search missing query, result_set or clicked");
                };
                let rs: HashSet<&String> = rs.iter().collect();
                if !clicked.iter().all(|c| rs.contains(c)) {
                    return Err("clicked product outside result_set");
                }
            }
        }
        Ok(())
    }
}

/// One (search event, clicked product) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// `<session_id>#<ordinal of the search within the session>`; shared by all clicks of one search.
    pub event_id: String,
    pub session_id: String,
    pub timestamp: i64,
    pub session_products: Vec<ProductId>,
    pub query: String,
    pub target_product: ProductId,
    pub target_path: Path,
    pub result_set: Vec<ProductId>,
    pub clicked: Vec<ProductId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub unknown_products: usize,
}

/// Reads a JSON Lines event log, grouped by session and sorted by time within each.
pub fn ingest(file: impl AsRef<FsPath>, tree: &TaxonomyTree) -> Result<(Vec<SessionEvent>, IngestReport)> {
    let file = file.as_ref();
    let reader = BufReader::new(File::open(file).map_err(|e| Error::io(file, e))?);
    let mut raw = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: SessionEvent = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
        raw.push(ev);
    }
    Ok(ingest_events(raw, tree))
}

pub fn ingest_events(raw: Vec<SessionEvent>, tree: &TaxonomyTree) -> (Vec<SessionEvent>, IngestReport) {
    let mut report = IngestReport::default();
    let mut events = Vec::with_capacity(raw.len());
    for mut ev in raw {
        if ev.check().is_err() {
            report.rejected += 1;
            continue;
        }
        match ev.kind {
            EventKind::View => {
                if !tree.contains(ev.product_id.as_deref().unwrap_or_default()) {
                    report.unknown_products += 1;
                    continue;
                }
            }
            EventKind::Search => {
                for list in [&mut ev.result_set, &mut ev.clicked].into_iter().flatten() {
                    let before = list.len();
                    list.retain(|p| tree.contains(p));
                    report.unknown_products += before - list.len();
                }
            }
        }
        events.push(ev);
    }
    report.accepted = events.len();
    sort_by_session(&mut events);
    (events, report)
}

/// Stable sort by (session, timestamp); sessions ordered by first timestamp.
pub fn sort_by_session(events: &mut [SessionEvent]) {
    let mut first: BTreeMap<&str, i64> = BTreeMap::new();
    for e in events.iter() {
        let t = first.entry(e.session_id.as_str()).or_insert(e.timestamp);
        *t = (*t).min(e.timestamp);
    }
    let first: BTreeMap<String, i64> = first.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    events.sort_by(|a, b| {
        (first[&a.session_id], &a.session_id, a.timestamp).cmp(&(first[&b.session_id], &b.session_id, b.timestamp))
    });
}

pub fn write_events(file: impl AsRef<FsPath>, events: &[SessionEvent]) -> Result<()> {
    let file = file.as_ref();
    let mut w = BufWriter::new(File::create(file).map_err(|e| Error::io(file, e))?);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(file, e))?;
    }
    w.flush().map_err(|e| Error::io(file, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildReport {
    pub search_events: usize,
    pub zero_click_searches: usize,
    pub skipped_clicks: usize,
}

/// Expands each search event into one example per clicked catalog product,
/// with every earlier view of the same session as context.
pub fn build_examples(events: &[SessionEvent], tree: &TaxonomyTree) -> (Vec<LabeledExample>, BuildReport) {
    let mut out = Vec::new();
    let mut report = BuildReport::default();
    let mut i = 0;
    while i < events.len() {
        let sid = &events[i].session_id;
        let mut j = i;
        while j < events.len() && &events[j].session_id == sid {
            j += 1;
        }
        let mut session: Vec<&SessionEvent> = events[i..j].iter().collect();
        // a view sharing a search's timestamp is not context for it
        session.sort_by_key(|e| (e.timestamp, e.kind != EventKind::Search));
        let mut seen: Vec<ProductId> = Vec::new();
        let mut ordinal = 0usize;
        for ev in session {
            match ev.kind {
                EventKind::View => {
                    if let Some(p) = &ev.product_id {
                        seen.push(p.clone());
                    }
                }
                EventKind::Search => {
                    report.search_events += 1;
                    let clicked = ev.clicked.clone().unwrap_or_default();
                    if clicked.is_empty() {
                        report.zero_click_searches += 1;
                    }
                    let event_id = format!("{sid}#{ordinal}");
                    ordinal += 1;
                    for c in &clicked {
                        let Some(path) = tree.path_of(c) else {
                            report.skipped_clicks += 1;
                            continue;
                        };
                        out.push(LabeledExample {
                            event_id: event_id.clone(),
                            session_id: sid.clone(),
                            timestamp: ev.timestamp,
                            session_products: seen.clone(),
                            query: ev.query.clone().unwrap_or_default(),
                            target_product: c.clone(),
                            target_path: path.clone(),
                            result_set: ev.result_set.clone().unwrap_or_default(),
                            clicked: clicked.clone(),
                        });
                    }
                }
            }
        }
        i = j;
    }
    (out, report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub split_boundary: i64,
    /// Indices into `test` whose normalized query never occurs in `train`.
    pub unseen_test: Vec<usize>,
}

impl DatasetSplit {
    pub fn is_unseen(&self, test_index: usize) -> bool {
        self.unseen_test.binary_search(&test_index).is_ok()
    }

    /// Earliest `fraction` of the training examples (by time), keeping the same test set.
    pub fn with_train_fraction(&self, fraction: f64) -> DatasetSplit {
        let n = ((self.train.len() as f64) * fraction).round().max(1.0) as usize;
        let train = self.train[..n.min(self.train.len())].to_vec();
        let unseen_test = unseen_indices(&train, &self.test);
        DatasetSplit { train, test: self.test.clone(), split_boundary: self.split_boundary, unseen_test }
    }
}

fn unseen_indices(train: &[LabeledExample], test: &[LabeledExample]) -> Vec<usize> {
    let seen: HashSet<String> = train.iter().map(|e| normalize_query(&e.query)).collect();
    test.iter()
        .enumerate()
        .filter(|(_, e)| !seen.contains(&normalize_query(&e.query)))
        .map(|(i, _)| i)
        .collect()
}

/// Earliest `fraction` of examples by time go to train, the rest to test.
/// The boundary is a timestamp, so examples sharing a timestamp stay together.
pub fn chronological_split(examples: &[LabeledExample], fraction: f64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::EmptySplit(fraction));
    }
    let mut sorted = examples.to_vec();
    sorted.sort_by_key(|e| e.timestamp);
    if sorted.is_empty() {
        return Err(Error::EmptySplit(fraction));
    }
    if sorted.first().map(|e| e.timestamp) == sorted.last().map(|e| e.timestamp) {
        return Err(Error::DegenerateTimeline);
    }
    let cut = ((sorted.len() as f64) * fraction).round() as usize;
    let cut = cut.clamp(1, sorted.len() - 1);
    let boundary = sorted[cut].timestamp;
    let (train, test): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|e| e.timestamp < boundary);
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptySplit(fraction));
    }
    let unseen_test = unseen_indices(&train, &test);
    Ok(DatasetSplit { train, test, split_boundary: boundary, unseen_test })
}
