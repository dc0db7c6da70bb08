//! Experiment configuration files.

use std::path::{Path, PathBuf};

use hoif::basis::{default_cutoff, default_k, DyadicGrid};
use hoif::estimators::EstimatorConfig;
use hoif::mar::{ErrorDirections, ModelSpec, SyntheticSpec, TripletModel};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest replication count accepted for a rate run.
pub const RATE_MIN_REPLICATIONS: usize = 100;
/// Fewest sample sizes accepted for a rate run.
pub const RATE_MIN_SIZES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub preliminary: PreliminaryConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    /// Enforces the size and replication floors needed to fit a rate.
    #[serde(default)]
    pub rate_run: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Smoothness fields set to `null` mean infinitely smooth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub level: u32,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma_f: Option<f64>,
    pub eta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreliminaryMode {
    Synthetic,
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    #[default]
    Independent,
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreliminaryConfig {
    pub mode: PreliminaryMode,
    /// Rates of `â` and `b̂`; also the smoothness used for the default `k` and grid.
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub c_a: f64,
    #[serde(default)]
    pub c_b: f64,
    #[serde(default)]
    pub c_g: f64,
    #[serde(default)]
    pub directions: Directions,
    #[serde(default)]
    pub seed: u64,
    /// Replace `ĝ` by the true `g`.
    #[serde(default)]
    pub known_density: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramSpec {
    #[default]
    Estimated,
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    /// Hyperbola cutoff `D`; the rate-optimal default when absent.
    #[serde(default)]
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub name: String,
    pub order: usize,
    /// Projection dimension; the rate-optimal default when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub truncation: Option<TruncationSpec>,
    #[serde(default)]
    pub gram: GramSpec,
    /// Average the estimates obtained by swapping the estimation and training samples.
    #[serde(default)]
    pub cross_fit: bool,
}

fn smooth(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_grid.is_empty() {
            return Err(bad("n_grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("n_grid must be strictly increasing"));
        }
        if self.n_grid[0] < 2 {
            return Err(bad("sample sizes must be at least 2"));
        }
        if self.replications == 0 {
            return Err(bad("replications must be positive"));
        }
        if self.rate_run {
            if self.replications < RATE_MIN_REPLICATIONS {
                return Err(bad(format!("a rate run needs at least {RATE_MIN_REPLICATIONS} replications")));
            }
            if self.n_grid.len() < RATE_MIN_SIZES {
                return Err(bad(format!("a rate run needs at least {RATE_MIN_SIZES} sample sizes")));
            }
        }
        if self.estimators.is_empty() {
            return Err(bad("no estimators"));
        }
        let mut names: Vec<&str> = self.estimators.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("estimator names must be unique"));
        }
        if names.iter().any(|n| n.is_empty() || n.contains([',', '"', '\n'])) {
            return Err(bad("estimator names must be non-empty and free of commas and quotes"));
        }
        let p = &self.preliminary;
        if !(p.alpha > 0.0 && p.beta > 0.0) {
            return Err(bad("preliminary alpha and beta must be positive"));
        }
        for e in &self.estimators {
            if e.order == 0 || e.order > hoif::estimators::MAX_ORDER {
                return Err(bad(format!("{}: order must lie in 1..={}", e.name, hoif::estimators::MAX_ORDER)));
            }
            if e.cross_fit && p.mode != PreliminaryMode::Fitted {
                return Err(bad(format!("{}: cross-fitting needs fitted preliminary estimates", e.name)));
            }
            if e.truncation.is_some() && e.order < 3 {
                return Err(bad(format!("{}: truncation needs order at least 3", e.name)));
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        let m = &self.model;
        ModelSpec {
            dim: m.dim,
            level: m.level,
            alpha: smooth(m.alpha),
            beta: smooth(m.beta),
            gamma_f: smooth(m.gamma_f),
            eta: m.eta,
            seed: m.seed,
        }
    }

    pub fn build_model(&self) -> Result<TripletModel> {
        Ok(TripletModel::synthesize(&self.model_spec())?)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let p = &self.preliminary;
        SyntheticSpec {
            alpha: p.alpha,
            beta: p.beta,
            gamma: smooth(p.gamma),
            c_a: p.c_a,
            c_b: p.c_b,
            c_g: p.c_g,
            seed: p.seed,
            directions: match p.directions {
                Directions::Independent => ErrorDirections::Independent,
                Directions::Aligned => ErrorDirections::Aligned,
            },
        }
    }
}

/// An estimator specification resolved at one sample size.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub k: usize,
    pub cutoff: Option<usize>,
    pub config: EstimatorConfig,
}

impl EstimatorSpec {
    pub fn resolve(&self, n: usize, cfg: &ExperimentConfig, model: &TripletModel) -> Result<Resolved> {
        let dim = cfg.model.dim;
        let (alpha, beta) = (cfg.preliminary.alpha, cfg.preliminary.beta);
        let k = if self.order == 1 {
            0
        } else {
            self.k.unwrap_or_else(|| default_k(n, alpha, beta, dim))
        };
        let mut config = EstimatorConfig::new(dim, self.order, k);
        let mut cutoff = None;
        if let Some(t) = &self.truncation {
            if k < n {
                return Err(bad(format!(
                    "{}: truncation needs k >= n, got k = {k} at n = {n}",
                    self.name
                )));
            }
            let grid = DyadicGrid::build(n, k, alpha, beta, dim)?;
            let d = t.cutoff.unwrap_or_else(|| default_cutoff(n, alpha, beta, dim));
            cutoff = Some(d);
            config = config.truncated(grid, d);
        }
        if self.gram == GramSpec::Known {
            config = config.known_density(model.g());
        }
        config.validate(dim)?;
        Ok(Resolved { k, cutoff, config })
    }
}
