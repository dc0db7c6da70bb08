//! File formats, Monte Carlo experiments and rate fits around the `hoif` core.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod rates;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run, ExperimentOutput, ResultRow, Summary};

/// Provenance lines written above every CSV this crate produces.
pub fn provenance(cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("hoif {}", env!("CARGO_PKG_VERSION")),
        format!("schema_version={}", config::SCHEMA_VERSION),
        format!("rng={} base_seed={}", io::RNG_NAME, cfg.base_seed),
        format!("config={}", serde_json::to_string(cfg).expect("configs serialize")),
    ]
}
