//! Optional JSON config file backing the command-line flags.
//!
//! Every key mirrors a flag (`--out-dir` ↔ `"out_dir"`). Precedence is
//! strict: an explicit flag always wins over the file, and a value required
//! by the running subcommand must come from one of the two.

use std::path::{Path, PathBuf};

use blockage_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub extractor: Option<String>,
    pub model_path: Option<PathBuf>,
    pub toy_dim: Option<usize>,
    pub preset: Option<String>,
    pub hidden_sizes: Option<Vec<usize>>,
    pub init_seed: Option<u64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub shuffle_seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Loads the file if a path was given; otherwise an empty config.
    /// Unknown keys are rejected — a typo must not silently fall back to a
    /// default.
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let raw = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        serde_json::from_str(&raw).map_err(|e| {
            Error::Config(format!("config file {}: {e}", path.display()))
        })
    }
}

/// Flag value, else config value, else an error naming both spellings.
pub fn need<T>(flag_name: &str, flag: Option<T>, file: Option<T>) -> Result<T> {
    flag.or(file).ok_or_else(|| {
        Error::Usage(format!(
            "missing --{flag_name} (or \"{}\" in the config file)",
            flag_name.replace('-', "_")
        ))
    })
}

/// Flag value, else config value, else the built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
