use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::error::{Error, Result};

/// Written by every command: what ran, with which settings, and how long each stage took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub git_describe: Option<String>,
    pub started_unix_ms: u128,
    pub config: Config,
    pub timings_ms: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
}

pub fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git").args(["describe", "--always", "--dirty", "--tags"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string()).filter(|s| !s.is_empty())
}

pub struct ManifestRecorder {
    manifest: RunManifest,
    stage_start: Instant,
}

impl ManifestRecorder {
    pub fn start(command: &str, config: &Config) -> Self {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        ManifestRecorder {
            manifest: RunManifest {
                command: command.to_string(),
                seed: config.seed,
                git_describe: git_describe(),
                started_unix_ms: started,
                config: config.clone(),
                timings_ms: BTreeMap::new(),
                outputs: Vec::new(),
            },
            stage_start: Instant::now(),
        }
    }

    /// Closes the current stage under `name` and starts the next one.
    pub fn stage(&mut self, name: &str) {
        self.manifest.timings_ms.insert(name.to_string(), self.stage_start.elapsed().as_secs_f64() * 1e3);
        self.stage_start = Instant::now();
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.outputs.push(path.into());
    }

    /// Writes `<artifacts>/manifests/<command>-<start>.json`.
    pub fn finish(self, artifacts_dir: &FsPath) -> Result<PathBuf> {
        let dir = artifacts_dir.join("manifests");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let file = dir.join(format!("{}-{}.json", self.manifest.command, self.manifest.started_unix_ms));
        std::fs::write(&file, serde_json::to_vec_pretty(&self.manifest)?).map_err(|e| Error::io(&file, e))?;
        Ok(file)
    }
}
