//! Configuration, run manifests, the CLI commands and the HTTP service.

pub mod commands;
mod config;
mod manifest;
pub mod service;

pub use config::{Config, ServiceConfig, SuiteSection, ENV_PREFIX};
pub use manifest::{git_describe, ManifestRecorder, RunManifest};
