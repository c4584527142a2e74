//! HTTP augmentation service: type-ahead candidates in, facet paths out.

use std::collections::BTreeMap;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Config, ServiceConfig};
use crate::decision::truncate_prediction;
use crate::error::Result;
use crate::eval::{filtered_result_set, golden_truth_set, simulate_event, sweep_from_trace, EventTrace, SearchEvent, SweepRow};
use crate::predictors::{Checkpoint, ModelKind, Predictor};
use crate::taxonomy::{load_catalog, Path, ProductId, TaxonomyTree};
use crate::text::normalize_query;
use crate::synth::CATALOG_FILE;

/// Immutable models and data served together; replaced atomically on reload.
#[derive(Debug, Clone)]
pub struct ArtifactSet {
    pub tree: TaxonomyTree,
    pub models: BTreeMap<ModelKind, Predictor>,
    pub default_model: ModelKind,
    pub default_ct: f64,
    pub trace: Option<Vec<EventTrace>>,
    pub sweep_cts: Vec<f64>,
}

impl ArtifactSet {
    /// Catalog from the data directory, every checkpoint found under the
    /// models directory, and the default model's evaluation trace if present.
    pub fn load(cfg: &Config) -> Result<Self> {
        let tree = load_catalog(cfg.data_dir.join(CATALOG_FILE))?;
        let mut models = BTreeMap::new();
        for kind in [ModelKind::Cm, ModelKind::Mlp, ModelKind::Sessionpath] {
            let file = cfg.checkpoint_path(kind);
            if file.exists() {
                models.insert(kind, Checkpoint::<Predictor>::load(&file, &tree)?.model);
            }
        }
        if models.is_empty() {
            return Err(crate::Error::Config(format!("no checkpoints under {}", cfg.models_dir().display())));
        }
        let default_model =
            if models.contains_key(&cfg.service.default_model) { cfg.service.default_model } else { *models.keys().next().unwrap() };
        let trace_file = cfg.trace_path(default_model);
        let trace = if trace_file.exists() { Some(crate::eval::read_trace(&trace_file)?) } else { None };
        Ok(ArtifactSet { tree, models, default_model, default_ct: cfg.decision.ct, trace, sweep_cts: cfg.sweep_cts.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRequest {
    #[serde(default)]
    pub session_products: Vec<ProductId>,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub ct_override: Option<f64>,
    #[serde(default)]
    pub model: Option<ModelKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePrediction {
    pub query: String,
    pub path: Path,
    /// Confidence of every kept node.
    pub gini: Vec<f64>,
    pub model: ModelKind,
    pub cache_hit: bool,
    pub latency_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentResponse {
    pub model: ModelKind,
    pub ct: f64,
    pub predictions: Vec<CandidatePrediction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub query: String,
    pub session: String,
    pub ct_bits: u64,
    pub model: ModelKind,
}

/// Order-insensitive digest of the session's product multiset.
pub fn session_signature<S: AsRef<str>>(products: &[S]) -> String {
    let mut ids: Vec<&str> = products.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Default)]
pub struct Metrics {
    pub requests: AtomicU64,
    pub augment_requests: AtomicU64,
    pub candidates: AtomicU64,
    pub cache_hits: AtomicU64,
    pub cache_misses: AtomicU64,
    pub client_errors: AtomicU64,
    pub server_errors: AtomicU64,
    pub unavailable: AtomicU64,
    latencies_us: Mutex<std::collections::VecDeque<u64>>,
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl Metrics {
    fn record_latency(&self, us: u64, window: usize) {
        let mut l = self.latencies_us.lock();
        if l.len() >= window.max(1) {
            l.pop_front();
        }
        l.push_back(us);
    }

    /// Flat `key=value` lines.
    pub fn render(&self) -> String {
        let mut lat: Vec<u64> = self.latencies_us.lock().iter().copied().collect();
        lat.sort_unstable();
        let hits = self.cache_hits.load(Ordering::Relaxed);
        let misses = self.cache_misses.load(Ordering::Relaxed);
        let rate = if hits + misses > 0 { hits as f64 / (hits + misses) as f64 } else { 0.0 };
        let mut out = String::new();
        for (k, v) in [
            ("requests_total", self.requests.load(Ordering::Relaxed)),
            ("augment_requests_total", self.augment_requests.load(Ordering::Relaxed)),
            ("candidates_total", self.candidates.load(Ordering::Relaxed)),
            ("cache_hits_total", hits),
            ("cache_misses_total", misses),
            ("client_errors_total", self.client_errors.load(Ordering::Relaxed)),
            ("server_errors_total", self.server_errors.load(Ordering::Relaxed)),
            ("unavailable_total", self.unavailable.load(Ordering::Relaxed)),
        ] {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("cache_hit_rate={rate:.6}\n"));
        for (k, q) in [("p50", 0.5), ("p90", 0.9), ("p99", 0.99)] {
            out.push_str(&format!("augment_latency_{k}_us={}\n", percentile(&lat, q)));
        }
        out.push_str(&format!("augment_latency_samples={}\n", lat.len()));
        out
    }
}

pub struct AppState {
    artifacts: RwLock<Option<Arc<ArtifactSet>>>,
    cache: Mutex<LruCache<CacheKey, (Path, Vec<f64>)>>,
    pub metrics: Metrics,
    cfg: ServiceConfig,
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Arc<Self> {
        let cap = NonZeroUsize::new(cfg.cache_capacity.max(1)).unwrap();
        Arc::new(AppState { artifacts: RwLock::new(None), cache: Mutex::new(LruCache::new(cap)), metrics: Metrics::default(), cfg })
    }

    /// Swaps in a new artifact set; cached predictions from the old one are dropped.
    pub fn install(&self, artifacts: ArtifactSet) {
        let mut slot = self.artifacts.write();
        *slot = Some(Arc::new(artifacts));
        self.cache.lock().clear();
    }

    pub fn artifacts(&self) -> Option<Arc<ArtifactSet>> {
        self.artifacts.read().clone()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().len()
    }

    /// The augmentation itself, independent of HTTP.
    pub fn augment(&self, req: &AugmentRequest) -> std::result::Result<AugmentResponse, ApiError> {
        let art = self.artifacts().ok_or(ApiError::Unavailable)?;
        let model = req.model.unwrap_or(art.default_model);
        let predictor = art.models.get(&model).ok_or_else(|| ApiError::BadRequest(format!("model {model} is not loaded")))?;
        let ct = req.ct_override.unwrap_or(art.default_ct);
        if !(0.0..=1.0).contains(&ct) {
            return Err(ApiError::BadRequest("ct_override must be within [0, 1]".into()));
        }
        let candidates: Vec<&String> = req.candidates.iter().take(self.cfg.max_candidates).collect();
        if candidates.is_empty() || candidates.iter().any(|c| normalize_query(c).is_empty()) {
            return Err(ApiError::BadRequest("candidates must be non-empty strings".into()));
        }

        let started = Instant::now();
        let session = session_signature(&req.session_products);
        let keys: Vec<CacheKey> = candidates
            .iter()
            .map(|c| CacheKey { query: normalize_query(c), session: session.clone(), ct_bits: ct.to_bits(), model })
            .collect();
        let mut found: Vec<Option<(Path, Vec<f64>)>> = {
            let mut cache = self.cache.lock();
            keys.iter().map(|k| cache.get(k).cloned()).collect()
        };
        let hit: Vec<bool> = found.iter().map(Option::is_some).collect();
        let missing: Vec<usize> = (0..keys.len()).filter(|&i| !hit[i]).collect();
        if !missing.is_empty() {
            let queries: Vec<&str> = missing.iter().map(|&i| keys[i].query.as_str()).collect();
            let preds = predictor
                .predict_candidates(&queries, &req.session_products)
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            let mut cache = self.cache.lock();
            for (&i, p) in missing.iter().zip(preds) {
                let path = truncate_prediction(&p, ct);
                let gini = p.step_gini[..path.depth()].to_vec();
                cache.put(keys[i].clone(), (path.clone(), gini.clone()));
                found[i] = Some((path, gini));
            }
        }
        let latency_us = started.elapsed().as_micros() as u64;
        self.metrics.candidates.fetch_add(keys.len() as u64, Ordering::Relaxed);
        self.metrics.cache_hits.fetch_add((keys.len() - missing.len()) as u64, Ordering::Relaxed);
        self.metrics.cache_misses.fetch_add(missing.len() as u64, Ordering::Relaxed);
        self.metrics.record_latency(latency_us, self.cfg.latency_window);

        let predictions = candidates
            .iter()
            .zip(found)
            .zip(hit)
            .map(|((q, f), cache_hit)| {
                let (path, gini) = f.expect("every candidate resolved");
                CandidatePrediction { query: q.to_string(), path, gini, model, cache_hit, latency_us }
            })
            .collect();
        Ok(AugmentResponse { model, ct, predictions })
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Unavailable,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unavailable => (StatusCode::SERVICE_UNAVAILABLE, "models are still loading".to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

fn count_outcome(state: &AppState, r: &std::result::Result<impl Sized, ApiError>) {
    state.metrics.requests.fetch_add(1, Ordering::Relaxed);
    let counter = match r {
        Ok(_) => return,
        Err(ApiError::BadRequest(_) | ApiError::NotFound(_)) => &state.metrics.client_errors,
        Err(ApiError::Unavailable) => &state.metrics.unavailable,
        Err(ApiError::Internal(_)) => &state.metrics.server_errors,
    };
    counter.fetch_add(1, Ordering::Relaxed);
}

async fn augment(State(state): State<Arc<AppState>>, body: Bytes) -> std::result::Result<Json<AugmentResponse>, ApiError> {
    state.metrics.augment_requests.fetch_add(1, Ordering::Relaxed);
    let r = parse_body::<AugmentRequest>(&body).and_then(|req| state.augment(&req));
    count_outcome(&state, &r);
    r.map(Json)
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    state.metrics.requests.fetch_add(1, Ordering::Relaxed);
    match state.artifacts() {
        Some(a) => Json(serde_json::json!({
            "status": "ok",
            "models": a.models.keys().collect::<Vec<_>>(),
            "default_model": a.default_model,
            "trace_events": a.trace.as_ref().map(Vec::len),
        }))
        .into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(serde_json::json!({ "status": "loading" }))).into_response(),
    }
}

async fn metrics(State(state): State<Arc<AppState>>) -> Response {
    state.metrics.requests.fetch_add(1, Ordering::Relaxed);
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], state.metrics.render()).into_response()
}

/// Either an explicit event, or a traced event id replayed at `ct`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    #[serde(default)]
    pub event_id: Option<String>,
    #[serde(default)]
    pub ct: Option<f64>,
    #[serde(default)]
    pub result_set: Option<Vec<ProductId>>,
    #[serde(default)]
    pub clicked: Option<Vec<ProductId>>,
    #[serde(default)]
    pub predicted: Option<Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub predicted: Path,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub golden_truth_set: Vec<Path>,
    pub filtered_result_set: Vec<ProductId>,
}

fn simulate_inner(art: &ArtifactSet, req: SimulateRequest) -> std::result::Result<SimulateResponse, ApiError> {
    let (event, predicted) = match (&req.event_id, req.result_set, req.clicked) {
        (Some(id), None, None) => {
            let trace = art.trace.as_ref().ok_or_else(|| ApiError::NotFound("no evaluation trace loaded".into()))?;
            let t = trace.iter().find(|t| &t.event.event_id == id).ok_or_else(|| ApiError::NotFound(format!("unknown event {id}")))?;
            let predicted = match (req.predicted, req.ct) {
                (Some(p), _) => p,
                (None, ct) => truncate_prediction(&t.prediction(), ct.unwrap_or(art.default_ct)),
            };
            (t.event.clone(), predicted)
        }
        (None, Some(result_set), Some(clicked)) => {
            let event = SearchEvent {
                event_id: String::new(),
                timestamp: 0,
                query: String::new(),
                session_products: Vec::new(),
                result_set,
                clicked,
            };
            (event, req.predicted.unwrap_or_else(Path::empty))
        }
        _ => return Err(ApiError::BadRequest("send either event_id or result_set + clicked".into())),
    };
    let o = simulate_event(&event, &predicted, &art.tree);
    Ok(SimulateResponse {
        tp: o.tp,
        fp: o.fp,
        fn_: o.fn_,
        precision: o.precision(),
        recall: o.recall(),
        golden_truth_set: golden_truth_set(&event, &art.tree).into_iter().collect(),
        filtered_result_set: filtered_result_set(&event, &predicted, &art.tree).into_iter().cloned().collect(),
        predicted,
    })
}

async fn simulate(State(state): State<Arc<AppState>>, body: Bytes) -> std::result::Result<Json<SimulateResponse>, ApiError> {
    let r = state
        .artifacts()
        .ok_or(ApiError::Unavailable)
        .and_then(|art| parse_body::<SimulateRequest>(&body).and_then(|req| simulate_inner(&art, req)));
    count_outcome(&state, &r);
    r.map(Json)
}

#[derive(Debug, Deserialize)]
pub struct SweepQuery {
    /// Comma-separated thresholds; the configured list when absent.
    pub cts: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResponse {
    pub model: ModelKind,
    pub events: usize,
    pub rows: Vec<SweepRow>,
}

fn sweep_inner(art: &ArtifactSet, q: SweepQuery) -> std::result::Result<SweepResponse, ApiError> {
    let trace = art.trace.as_ref().ok_or_else(|| ApiError::NotFound("no evaluation trace loaded".into()))?;
    let cts = match q.cts {
        Some(list) => parse_ct_list(&list).map_err(ApiError::BadRequest)?,
        None => art.sweep_cts.clone(),
    };
    Ok(SweepResponse { model: art.default_model, events: trace.len(), rows: sweep_from_trace(trace, &cts, &art.tree) })
}

async fn sweep(State(state): State<Arc<AppState>>, Query(q): Query<SweepQuery>) -> std::result::Result<Json<SweepResponse>, ApiError> {
    let r = state.artifacts().ok_or(ApiError::Unavailable).and_then(|art| sweep_inner(&art, q));
    count_outcome(&state, &r);
    r.map(Json)
}

pub fn parse_ct_list(list: &str) -> std::result::Result<Vec<f64>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(|| format!("bad threshold {s:?}: expected a number in [0, 1]"))
        })
        .collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/augment", post(augment))
        .route("/health", get(health))
        .route("/metrics", get(metrics))
        .route("/simulate", post(simulate))
        .route("/sweep", get(sweep))
        .with_state(state)
}

/// Binds first, then loads artifacts in the background; requests get 503 until then.
pub async fn serve(cfg: Config) -> Result<()> {
    let state = AppState::new(cfg.service.clone());
    let listener = tokio::net::TcpListener::bind(cfg.service.addr).await.map_err(|e| crate::Error::Net(e))?;
    tracing::info!(addr = %cfg.service.addr, "listening");
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match ArtifactSet::load(&cfg) {
        Ok(a) => {
            tracing::info!(models = ?a.models.keys().collect::<Vec<_>>(), "artifacts loaded");
            loader.install(a);
        }
        Err(e) => tracing::error!(error = %e, "loading artifacts failed"),
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| crate::Error::Net(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_ignores_order_not_multiplicity() {
        assert_eq!(session_signature(&["a", "b"]), session_signature(&["b", "a"]));
        assert_ne!(session_signature(&["a", "b"]), session_signature(&["a", "a", "b"]));
        assert_ne!(session_signature(&["ab"]), session_signature(&["a", "b"]));
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.5), 50);
        assert_eq!(percentile(&v, 0.99), 99);
        assert_eq!(percentile(&[], 0.9), 0);
    }

    #[test]
    fn ct_lists() {
        assert_eq!(parse_ct_list("0.9, 0.99").unwrap(), vec![0.9, 0.99]);
        assert!(parse_ct_list("0.9,x").is_err());
        assert!(parse_ct_list("1.5").is_err());
    }
}
