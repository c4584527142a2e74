use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decision::DecisionConfig;
use crate::embeddings::SkipGramConfig;
use crate::error::{Error, Result};
use crate::eval::{EncoderKind, ModelSettings, SuiteConfig, Variant, DEFAULT_SWEEP};
use crate::predictors::ModelKind;
use crate::synth::SynthConfig;

pub const ENV_PREFIX: &str = "FACETPATH_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub cache_capacity: usize,
    pub max_candidates: usize,
    pub default_model: ModelKind,
    /// Number of recent request latencies kept for percentiles.
    pub latency_window: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            cache_capacity: 10_000,
            max_candidates: 10,
            default_model: ModelKind::Sessionpath,
            latency_window: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub variants: Vec<Variant>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        let d = SuiteConfig::default();
        SuiteSection { variants: d.variants, fractions: d.fractions, seeds: d.seeds }
    }
}

/// Everything a command needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub artifacts_dir: PathBuf,
    /// Share of examples (earliest first) used for training.
    pub train_fraction: f64,
    pub encoder: EncoderKind,
    pub use_session: bool,
    pub external_query_embeddings: Option<PathBuf>,
    pub sweep_cts: Vec<f64>,
    pub synth: SynthConfig,
    pub embeddings: SkipGramConfig,
    pub models: ModelSettings,
    pub decision: DecisionConfig,
    pub suite: SuiteSection,
    pub service: ServiceConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 7,
            data_dir: "data".into(),
            artifacts_dir: "artifacts".into(),
            train_fraction: 0.8,
            encoder: EncoderKind::S2pv,
            use_session: true,
            external_query_embeddings: None,
            sweep_cts: DEFAULT_SWEEP.to_vec(),
            synth: SynthConfig::default(),
            embeddings: SkipGramConfig::default(),
            models: ModelSettings::default(),
            decision: DecisionConfig::default(),
            suite: SuiteSection::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl Config {
    /// Reads the file (if any), then applies `FACETPATH_*` environment overrides.
    pub fn load(file: Option<&FsPath>) -> Result<Self> {
        let text = match file {
            Some(f) => std::fs::read_to_string(f).map_err(|e| Error::io(f, e))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    /// `FACETPATH_SEED=3` sets `seed`; a double underscore descends into a
    /// table, so `FACETPATH_SERVICE__ADDR` sets `service.addr`.
    pub fn from_toml_with_env(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (key, value) in vars {
            let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
            set_path(&mut root, &path, parse_env_value(&value))?;
        }
        toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            variants: self.suite.variants.clone(),
            fractions: self.suite.fractions.clone(),
            seeds: self.suite.seeds.clone(),
            cts: self.sweep_cts.clone(),
            models: self.models.clone(),
        }
    }

    pub fn variant(&self, model: ModelKind) -> Variant {
        Variant::new(model, self.encoder, self.use_session)
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        self.artifacts_dir.join("embeddings")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.artifacts_dir.join("models")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.artifacts_dir.join("eval")
    }

    pub fn checkpoint_path(&self, model: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{model}.json"))
    }

    pub fn trace_path(&self, model: ModelKind) -> PathBuf {
        self.eval_dir().join(format!("{model}-trace.jsonl"))
    }
}

/// TOML literal when it parses as one, plain string otherwise.
fn parse_env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    match path {
        [] => Err(Error::Config("empty override key".into())),
        [last] => {
            table.insert(last.clone(), value);
            Ok(())
        }
        [head, rest @ ..] => {
            let entry = table.entry(head.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => set_path(t, rest, value),
                _ => Err(Error::Config(format!("{head} is not a table"))),
            }
        }
    }
}
