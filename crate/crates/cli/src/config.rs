use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use protoret::dataset::LeakageMode;

/// A problem with the configuration or command line (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(message: impl Into<String>) -> anyhow::Error {
    ConfigError(message.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverChoice {
    #[default]
    Matching,
    Feature,
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub store: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

/// Scorer process or socket for the external retriever.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalConfig {
    pub command: Option<Vec<String>>,
    pub address: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

/// Everything a pipeline stage can read from the TOML config file. Command
/// line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub min_overlap: usize,
    pub pool_size: usize,
    pub seed: u64,
    pub retriever: RetrieverChoice,
    pub min_concepts: usize,
    pub max_concepts: usize,
    pub leakage_mode: LeakageMode,
    pub leakage_include_dev: bool,
    pub fallback_on_scorer_failure: bool,
    pub max_candidates: Option<usize>,
    pub neg_per_pos: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub paths: Paths,
    pub external: ExternalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: protoret::retrieval::DEFAULT_K,
            min_overlap: protoret::index::DEFAULT_MIN_OVERLAP,
            pool_size: 500_000,
            seed: 0,
            retriever: RetrieverChoice::Matching,
            min_concepts: 3,
            max_concepts: 7,
            leakage_mode: LeakageMode::Exact,
            leakage_include_dev: false,
            fallback_on_scorer_failure: false,
            max_candidates: None,
            neg_per_pos: 3,
            epochs: 300,
            learning_rate: 0.01,
            paths: Paths::default(),
            external: ExternalConfig {
                command: None,
                address: None,
                timeout_secs: 30,
                batch_size: protoret::retrieval::protocol::DEFAULT_BATCH_SIZE,
            },
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| {
            config_error(format!(
                "invalid config {}: {}",
                path.display(),
                e.message()
            ))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.min_overlap == 0 {
            return Err(config_error("min_overlap must be at least 1"));
        }
        if self.min_concepts == 0 || self.min_concepts > self.max_concepts {
            return Err(config_error(format!(
                "concept size bounds [{}, {}] are empty",
                self.min_concepts, self.max_concepts
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(config_error("learning_rate must be positive"));
        }
        if self.external.timeout_secs == 0 {
            return Err(config_error("external.timeout_secs must be positive"));
        }
        Ok(())
    }
}

pub fn require<T>(value: Option<T>, flag: &str, key: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| config_error(format!("missing {flag} (or `{key}` in the config file)")))
}
