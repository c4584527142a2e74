use std::path::Path as FsPath;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::taxonomy::TaxonomyTree;

/// JSON checkpoint container: model parameters at full precision plus the
/// node-vocabulary fingerprint they were trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format: String,
    pub model_kind: String,
    pub vocabulary_fingerprint: String,
    pub train_config: TrainConfig,
    pub model: M,
}

impl<M: Serialize + DeserializeOwned> Checkpoint<M> {
    pub const FORMAT: &'static str = "facetpath-checkpoint/1";

    pub fn new(model_kind: &str, tree: &TaxonomyTree, train_config: TrainConfig, model: M) -> Self {
        Checkpoint {
            format: Self::FORMAT.to_string(),
            model_kind: model_kind.to_string(),
            vocabulary_fingerprint: tree.node_vocabulary().fingerprint(),
            train_config,
            model,
        }
    }

    pub fn save(&self, file: impl AsRef<FsPath>) -> Result<()> {
        let file = file.as_ref();
        std::fs::write(file, serde_json::to_vec(self)?).map_err(|e| Error::io(file, e))
    }

    /// Loads and verifies the vocabulary against the live taxonomy.
    pub fn load(file: impl AsRef<FsPath>, tree: &TaxonomyTree) -> Result<Self> {
        let file = file.as_ref();
        let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
        let ck: Self = serde_json::from_slice(&bytes)?;
        if ck.format != Self::FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {:?}", ck.format)));
        }
        let expected = tree.node_vocabulary().fingerprint();
        if ck.vocabulary_fingerprint != expected {
            return Err(Error::VocabularyMismatch { expected, found: ck.vocabulary_fingerprint });
        }
        Ok(ck)
    }
}
