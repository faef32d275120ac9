//! Run configuration: a flat TOML file of `key = value` pairs.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Reports echo the paths exactly as written so that they stay
//! comparable across machines.

use crate::error::{CliError, CliResult, ErrorKind};
use serde::{Deserialize, Serialize};
use soa_bench::detection_io::DEFAULT_SCORE_THRESHOLD;
use soa_bench::distribution_metrics::{DEFAULT_DISTRACTORS, DEFAULT_IS_SPLITS, DEFAULT_TOP_K};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_embeddings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption_embeddings: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_splits")]
    pub is_splits: usize,
    #[serde(default = "default_distractors")]
    pub distractors: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
}

fn default_model() -> String {
    "model".to_string()
}
fn default_threshold() -> f64 {
    DEFAULT_SCORE_THRESHOLD
}
fn default_splits() -> usize {
    DEFAULT_IS_SPLITS
}
fn default_distractors() -> usize {
    DEFAULT_DISTRACTORS
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_out() -> String {
    "out".to_string()
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    /// `--out` is relative to the working directory, not the config file.
    out_from_cli: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::config(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.is_splits == 0 {
            return Err(CliError::config("is_splits must be at least 1"));
        }
        if self.distractors == 0 {
            return Err(CliError::config("distractors must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(CliError::config("top_k must be at least 1"));
        }
        Ok(())
    }
}

impl Loaded {
    pub fn from_file(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let kind = if e.kind() == std::io::ErrorKind::NotFound {
                ErrorKind::InputMissing
            } else {
                ErrorKind::InvalidConfig
            };
            CliError::new(kind, format!("cannot read config: {e}")).at(path.display())
        })?;
        let mut config = RunConfig::parse(&text).map_err(|e| e.at(path.display()))?;
        if let Some(t) = overrides.threshold {
            config.threshold = t;
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if let Some(o) = &overrides.out {
            config.out = o.clone();
        }
        config.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Loaded {
            config,
            base,
            out_from_cli: overrides.out.is_some(),
        })
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base.join(path)
    }

    /// Resolved path of a required input, or `InputMissing`.
    pub fn require(&self, key: &str, value: &Option<String>) -> CliResult<(String, PathBuf)> {
        let given = value
            .as_ref()
            .ok_or_else(|| CliError::new(ErrorKind::InputMissing, format!("no `{key}` path configured")))?;
        let path = self.resolve(given);
        if !path.exists() {
            return Err(CliError::new(ErrorKind::InputMissing, format!("{key} file not found")).at(path.display()));
        }
        Ok((given.clone(), path))
    }

    pub fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = if self.out_from_cli {
            PathBuf::from(&self.config.out)
        } else {
            self.resolve(&self.config.out)
        };
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::internal(format!("cannot create output directory: {e}")).at(dir.display()))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse("detections = \"d.jsonl\"").unwrap();
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.is_splits, 10);
        assert_eq!(c.distractors, 99);
        assert_eq!(c.out, "out");
        assert_eq!(c.detections.as_deref(), Some("d.jsonl"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("treshold = 0.3").unwrap_err();
        assert_eq!(err.kind, ErrorKind::InvalidConfig);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::parse("").unwrap();
        c.threshold = 1.5;
        assert!(c.validate().is_err());
        c.threshold = 1.0;
        c.is_splits = 0;
        assert!(c.validate().is_err());
    }
}
