use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::builder::BuildConfig;
use crate::error::{Error, Result};
use crate::learn::LearnConfig;
use crate::search::SearchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// Window length in frames.
    pub tau: u32,
    /// Minimal dense-structure size; also caps every `y_i` at `1/alpha_hat`.
    pub alpha_hat: usize,
    /// Windows a target may go unmatched before it is terminated. Defaults to
    /// `build.max_frame_gap`.
    pub max_missed_windows: Option<u32>,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            tau: 7,
            alpha_hat: 2,
            max_missed_windows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub iou_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

/// Everything tunable, loaded from one TOML file. Missing keys take their
/// defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub build: BuildConfig,
    pub tracking: TrackingConfig,
    pub search: SearchConfig,
    pub metrics: MetricsConfig,
    pub learn: LearnConfig,
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &str) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn sync(&mut self) {
        self.search.alpha_hat = self.tracking.alpha_hat;
    }

    pub fn validate(&self) -> Result<()> {
        self.build.validate()?;
        self.search.validate()?;
        self.learn.validate()?;
        if self.tracking.tau < 2 {
            return Err(Error::Config(format!("tracking.tau must be >= 2, got {}", self.tracking.tau)));
        }
        if self.tracking.alpha_hat < 1 {
            return Err(Error::Config("tracking.alpha_hat must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.metrics.iou_threshold) {
            return Err(Error::Config("metrics.iou_threshold must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Search settings with `alpha_hat` taken from the tracking section.
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            alpha_hat: self.tracking.alpha_hat,
            ..self.search.clone()
        }
    }

    pub fn max_missed_windows(&self) -> u32 {
        self.tracking.max_missed_windows.unwrap_or(self.build.max_frame_gap)
    }

    /// Single-line JSON with fields in declaration order.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Comment lines embedded in every output file.
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!(" {}", super::TOOL_VERSION),
            format!(" config_hash: {}", self.hash()),
            format!(" config: {}", self.canonical()),
        ]
    }
}
