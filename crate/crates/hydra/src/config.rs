//! Flat TOML configuration and user rule files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hydra_core::heuristics::{HeuristicRule, RuleError};
use hydra_core::pipeline::{PipelineConfig, Variant};
use hydra_core::RuleSet;
use serde::{Deserialize, Serialize};

use crate::ingest::{default_extensions, CsvOptions, DEFAULT_COLUMN, PROJECT_COLUMN};
use crate::remote::{DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Rules {
        path: PathBuf,
        #[source]
        source: RuleError,
    },
    #[error("remote provider needs an endpoint (--endpoint or `endpoint` in the config file)")]
    MissingEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Hashed,
    Remote,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hashed" => Ok(ProviderKind::Hashed),
            "remote" => Ok(ProviderKind::Remote),
            _ => Err(format!("unknown provider `{s}` (expected hashed or remote)")),
        }
    }
}

/// Every setting, one key each. Missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub variant: Variant,
    pub jobs: Option<usize>,
    pub rules_file: Option<PathBuf>,

    pub csv_column: String,
    pub id_column: Option<String>,
    pub project_column: Option<String>,
    pub limit: Option<usize>,
    pub extensions: Vec<String>,

    pub provider: ProviderKind,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub max_tokens: usize,

    pub k: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub match_threshold: f64,

    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub kl_weight: f64,
    pub validation_fraction: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: p.seed,
            variant: Variant::Hydra,
            jobs: None,
            rules_file: None,
            csv_column: DEFAULT_COLUMN.to_string(),
            id_column: None,
            project_column: Some(PROJECT_COLUMN.to_string()),
            limit: None,
            extensions: default_extensions().into_iter().collect(),
            provider: ProviderKind::Hashed,
            endpoint: None,
            timeout_secs: DEFAULT_TIMEOUT.as_secs_f64(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            max_tokens: hydra_core::HashedEmbedder::default().max_tokens,
            k: p.k,
            kmeans_max_iter: p.kmeans_max_iter,
            kmeans_tol: p.kmeans_tol,
            match_threshold: p.match_threshold,
            latent_dim: p.vae.latent_dim,
            hidden_dims: p.vae.hidden_dims.clone(),
            epochs: p.vae.epochs,
            batch_size: p.vae.batch_size,
            learning_rate: p.vae.learning_rate,
            momentum: p.vae.momentum,
            kl_weight: p.vae.kl_weight,
            validation_fraction: p.vae.validation_fraction,
        }
    }
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig {
            k: self.k,
            seed: self.seed,
            kmeans_max_iter: self.kmeans_max_iter,
            kmeans_tol: self.kmeans_tol,
            match_threshold: self.match_threshold,
            ..PipelineConfig::default()
        };
        p.vae.latent_dim = self.latent_dim;
        p.vae.hidden_dims = self.hidden_dims.clone();
        p.vae.epochs = self.epochs;
        p.vae.batch_size = self.batch_size;
        p.vae.learning_rate = self.learning_rate;
        p.vae.momentum = self.momentum;
        p.vae.kl_weight = self.kl_weight;
        p.vae.validation_fraction = self.validation_fraction;
        p.vae.seed = self.seed;
        p
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            column: self.csv_column.clone(),
            id_column: self.id_column.clone(),
            project_column: self.project_column.clone(),
            limit: self.limit,
        }
    }

    pub fn extension_set(&self) -> BTreeSet<String> {
        self.extensions.iter().map(|e| e.trim_start_matches('.').to_string()).collect()
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(crate::features::default_jobs).max(1)
    }

    /// Built-in rules plus those in `rules_file`, if set.
    pub fn rules(&self) -> Result<RuleSet, ConfigError> {
        match &self.rules_file {
            Some(p) => load_rules_file(p),
            None => Ok(RuleSet::default_rules()),
        }
    }
}

/// `[[rule]]` tables in a rules file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesFile {
    #[serde(default, rename = "rule")]
    pub rules: Vec<HeuristicRule>,
}

pub fn parse_rules(text: &str) -> Result<Vec<HeuristicRule>, toml::de::Error> {
    toml::from_str::<RulesFile>(text).map(|f| f.rules)
}

/// Appends the rules in `path` to the built-in set.
pub fn load_rules_file(path: &Path) -> Result<RuleSet, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let extra = parse_rules(&text).map_err(|source| ConfigError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    RuleSet::default_rules()
        .with_additional(extra)
        .map_err(|source| ConfigError::Rules {
            path: path.to_path_buf(),
            source,
        })
}
