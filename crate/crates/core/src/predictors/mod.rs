//! Facet path predictors: the count baseline, the full-path MLP classifier and
//! the SessionPath encoder-decoder.

mod checkpoint;
mod count;
mod mlp;
mod sessionpath;

use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use count::{CountModel, CM_THRESHOLD};
pub use mlp::{MlpArch, MlpModel, MlpNet};
pub use sessionpath::{SessionPathModel, SessionPathNet, SpArch, SpExample};

use crate::embeddings::{session_vector, EmbeddingTable, QueryEncoder};
use crate::error::Result;
use crate::taxonomy::Path;

/// A generated path with the distribution behind every emitted node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPrediction {
    pub nodes: Path,
    pub step_distributions: Vec<Vec<f64>>,
    pub step_gini: Vec<f64>,
}

impl PathPrediction {
    pub fn empty() -> Self {
        PathPrediction { nodes: Path::empty(), step_distributions: Vec::new(), step_gini: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.nodes.depth()
    }
}

/// Encoder input: query vector followed by the session vector (zeros when ablated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub query: QueryEncoder,
    pub products: EmbeddingTable,
    pub use_session: bool,
}

impl Featurizer {
    pub fn new(query: QueryEncoder, products: EmbeddingTable, use_session: bool) -> Self {
        Featurizer { query, products, use_session }
    }

    pub fn dim(&self) -> usize {
        self.query.dim() + self.products.dim()
    }

    pub fn session_part<S: AsRef<str>>(&self, session_products: &[S]) -> Vec<f64> {
        if self.use_session {
            session_vector(session_products, &self.products).values
        } else {
            vec![0.0; self.products.dim()]
        }
    }

    pub fn features<S: AsRef<str>>(&self, query: &str, session_products: &[S]) -> Vec<f64> {
        self.features_with_session(query, &self.session_part(session_products))
    }

    /// Reuses an already pooled session vector (one per request in the service).
    pub fn features_with_session(&self, query: &str, session: &[f64]) -> Vec<f64> {
        let mut v = self.query.encode(query).values;
        v.extend_from_slice(session);
        v
    }
}

/// Which predictor a request or experiment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cm,
    Mlp,
    #[serde(alias = "sp")]
    Sessionpath,
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cm" | "count" => Ok(ModelKind::Cm),
            "mlp" => Ok(ModelKind::Mlp),
            "sessionpath" | "sp" => Ok(ModelKind::Sessionpath),
            other => Err(crate::Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Cm => "cm",
            ModelKind::Mlp => "mlp",
            ModelKind::Sessionpath => "sessionpath",
        })
    }
}

/// Any trained predictor behind one interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum Predictor {
    Cm(CountModel),
    Mlp(MlpModel),
    Sessionpath(SessionPathModel),
}

const BATCH: usize = 512;

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::Cm(_) => ModelKind::Cm,
            Predictor::Mlp(_) => ModelKind::Mlp,
            Predictor::Sessionpath(_) => ModelKind::Sessionpath,
        }
    }

    fn featurizer(&self) -> Option<&Featurizer> {
        match self {
            Predictor::Cm(_) => None,
            Predictor::Mlp(m) => Some(&m.featurizer),
            Predictor::Sessionpath(m) => Some(&m.featurizer),
        }
    }

    fn from_features(&self, rows: &[Vec<f64>]) -> Result<Vec<PathPrediction>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(BATCH) {
            out.extend(match self {
                Predictor::Mlp(m) => m.predict_features(chunk)?,
                Predictor::Sessionpath(m) => m.generate_features(chunk)?,
                Predictor::Cm(_) => unreachable!("count model has no features"),
            });
        }
        Ok(out)
    }

    /// The count model has no node distributions; its stored path is reported
    /// with confidence 1 at every node so no threshold in `[0, 1]` cuts it.
    fn count_prediction(cm: &CountModel, query: &str) -> PathPrediction {
        match cm.predict(query) {
            Some(p) => PathPrediction {
                nodes: p.clone(),
                step_distributions: vec![Vec::new(); p.depth()],
                step_gini: vec![1.0; p.depth()],
            },
            None => PathPrediction::empty(),
        }
    }

    /// Predictions for several query candidates sharing one session; the
    /// session vector is pooled once.
    pub fn predict_candidates<S: AsRef<str>, Q: AsRef<str>>(
        &self,
        queries: &[Q],
        session_products: &[S],
    ) -> Result<Vec<PathPrediction>> {
        match (self, self.featurizer()) {
            (Predictor::Cm(cm), _) => Ok(queries.iter().map(|q| Self::count_prediction(cm, q.as_ref())).collect()),
            (_, Some(f)) => {
                let session = f.session_part(session_products);
                let rows: Vec<Vec<f64>> = queries.iter().map(|q| f.features_with_session(q.as_ref(), &session)).collect();
                self.from_features(&rows)
            }
            _ => unreachable!(),
        }
    }

    /// One prediction per `(query, session)` pair, batched.
    pub fn predict_pairs<S: AsRef<str>>(&self, pairs: &[(&str, &[S])]) -> Result<Vec<PathPrediction>> {
        match (self, self.featurizer()) {
            (Predictor::Cm(cm), _) => Ok(pairs.iter().map(|(q, _)| Self::count_prediction(cm, q)).collect()),
            (_, Some(f)) => {
                let rows: Vec<Vec<f64>> = pairs.iter().map(|(q, s)| f.features(q, s)).collect();
                self.from_features(&rows)
            }
            _ => unreachable!(),
        }
    }

    pub fn predict<S: AsRef<str>>(&self, query: &str, session_products: &[S]) -> Result<PathPrediction> {
        Ok(self.predict_candidates(&[query], session_products)?.remove(0))
    }
}
