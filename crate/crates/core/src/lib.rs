pub mod app;
pub mod decision;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod eventlog;
pub mod nn;
pub mod predictors;
pub mod synth;
pub mod taxonomy;
pub mod text;

pub use error::{Error, Result};
