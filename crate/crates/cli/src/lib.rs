//! `sonocl` command-line tool and the HTTP session service.

pub mod commands;
pub mod config;
pub mod server;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sonocl::eval::FeatureKind;

pub use config::{Config, UsageError};

#[derive(Debug, Parser)]
#[command(name = "sonocl", version, about = "Sonification cognitive-load toolkit")]
pub struct Cli {
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the ten stimulus levels of one parameter (or all) as WAV/PGM files.
    Synth(SynthArgs),
    /// Epoch, filter and clean a raw recording.
    Preprocess(PreprocessArgs),
    /// Compute one feature representation for an epoch file.
    Features(FeaturesArgs),
    /// Fit one classifier on all labelled epochs.
    Train(TrainArgs),
    /// Repeated stratified cross-validation of a classifier.
    Eval(EvalArgs),
    /// Pairwise Siamese similarity of the six parameters.
    Similarity(SimilarityArgs),
    /// Generate a synthetic labelled epoch file.
    Simulate(SimulateArgs),
    /// Per-parameter mapping accuracy from exported session bundles.
    Mapping(MappingArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Parameter name (noise, pitch, rough, audiocomb, visual, visualcomb) or `all`.
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Recording CSV, one column per channel.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Marker CSV; defaults to the file next to the recording.
    #[arg(long)]
    pub markers: Option<PathBuf>,
    /// Exported session bundles whose TLX ratings label the epochs.
    #[arg(long = "bundle")]
    pub bundles: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub feature: Option<FeatureKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// gnb, lda, svm-linear, svm-rbf, cnn1d, eegnet, topo-a..d, spect-a..d
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub feature: Option<FeatureKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Classifier name as for `train`, or `fusion`.
    #[arg(long)]
    pub arch: Option<String>,
    /// Representation; for `fusion` this picks the spatial stream.
    #[arg(long)]
    pub feature: Option<FeatureKind>,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Permute the labels first (chance-level control).
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Also print the aligned text table.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub effect: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub balance: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Emit this many epochs per parameter, labelled by the parameter's
    /// nominal load class, instead of a mixed two-class set.
    #[arg(long)]
    pub per_parameter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MappingArgs {
    /// Exported session bundles (JSON), all of one session kind.
    #[arg(long = "bundle")]
    pub bundles: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    commands::dispatch(cli.command, &config)
}

/// Exit status and error class for a failure.
pub fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    use sonocl::ErrorKind;
    if err.downcast_ref::<UsageError>().is_some() {
        return (1, "usage");
    }
    if let Some(e) = err.downcast_ref::<sonocl::Error>() {
        return match e.kind() {
            ErrorKind::Usage => (1, "usage"),
            ErrorKind::Data => (2, "data"),
            ErrorKind::Numeric => (3, "numeric"),
        };
    }
    (2, "data")
}

/// The single-line JSON written to stderr on failure.
pub fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}
