//! Offline evaluation: depth accuracy, log-replay precision/recall, threshold
//! sweeps and the multi-seed experiment suite.

mod metrics;
mod suite;

pub use metrics::*;
pub use suite::*;
