use std::fs;
use std::path::{Path, PathBuf};

use robomorph::evolution::EvolutionConfig;
use robomorph::generator::{DesignGenerator, OfflineSampler, RemoteConfig, RemoteGenerator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Offline,
    Remote,
}

/// Everything one run needs, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub backend: Backend,
    pub evolution: EvolutionConfig,
    pub remote: RemoteConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("robomorph-run"),
            backend: Backend::Offline,
            evolution: EvolutionConfig::default(),
            remote: RemoteConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                RunConfig::from_toml(&text).map_err(|e| CliError::config(format!("{}: {}", p.display(), e.message)))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.evolution.validate().map_err(|e| CliError::config(e.to_string()))?;
        let r = &self.remote;
        if r.endpoint.trim().is_empty() || r.model.trim().is_empty() || r.api_key_env.trim().is_empty() {
            return Err(CliError::config("remote endpoint, model and api_key_env must be set"));
        }
        if !(r.timeout > 0.0 && r.timeout.is_finite()) {
            return Err(CliError::config("remote timeout must be positive"));
        }
        if !(r.backoff_base >= 0.0 && r.backoff_base.is_finite()) {
            return Err(CliError::config("remote backoff_base must be non-negative"));
        }
        if r.max_in_flight < 1 {
            return Err(CliError::config("remote max_in_flight must be at least 1"));
        }
        Ok(())
    }

    /// Builds the configured backend. A remote backend without its API key
    /// is a configuration error.
    pub fn generator(&self) -> Result<Box<dyn DesignGenerator>, CliError> {
        Ok(match self.backend {
            Backend::Offline => Box::new(OfflineSampler::new()),
            Backend::Remote => Box::new(RemoteGenerator::new(self.remote.clone())?),
        })
    }
}
