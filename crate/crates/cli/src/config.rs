use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sonocl::classical::ClassicalConfig;
use sonocl::eval::{CvConfig, FeatureKind, SimilarityConfig, SyntheticSpec};
use sonocl::neural::TrainConfig;
use sonocl::preprocess::PreprocessConfig;

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Settings file shared by all subcommands. Flags on the command line win
/// over values here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub markers: Option<PathBuf>,
    pub bundles: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub param: Option<String>,
    pub feature: Option<FeatureKind>,
    pub arch: Option<String>,
    pub sample_rate: Option<u32>,
    pub image_size: Option<usize>,
    pub tlx_threshold: Option<f64>,
    pub shuffle_labels: bool,
    pub cv: CvConfig,
    /// Network training; fusion keeps its own defaults when absent.
    pub train: Option<TrainConfig>,
    pub head_train: Option<TrainConfig>,
    pub classical: ClassicalConfig,
    pub preprocess: PreprocessConfig,
    pub synthetic: SyntheticSpec,
    pub similarity: SimilarityConfig,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

/// First of the flag and the config value, or a usage error naming `what`.
pub fn required<T: Clone>(flag: Option<T>, config: &Option<T>, what: &str) -> anyhow::Result<T> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| usage(format!("missing --{what}")))
}
