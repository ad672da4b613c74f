use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "narrative",
    version,
    about = "Fit topic and narrative models and extrapolate Q&A answers"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic answers with planted narratives.
    Synth(SynthArgs),
    /// Fit the joint topic/narrative model.
    Fit(FitArgs),
    /// Fit the in-context extrapolator and predict unanswered documents.
    Icl(IclArgs),
    /// Score a fitted model or a set of predictions.
    Eval(EvalArgs),
    /// Aggregate metrics directories into plot-ready tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub docs: Option<usize>,
    #[arg(long)]
    pub questions: Option<usize>,
    #[arg(long)]
    pub answers: Option<usize>,
    #[arg(long)]
    pub narratives: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Embedding dimension; 0 skips embeddings.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub embed_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    pub bow: Option<PathBuf>,
    /// Document embeddings (required in projected mode).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Planted truth; adds recovery metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub narratives: Option<usize>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub lr_g: Option<f64>,
    #[arg(long)]
    pub lr_omega: Option<f64>,
    /// Multiplier of the median-distance bandwidth.
    #[arg(long)]
    pub bandwidth_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IclArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Answers of the context documents.
    #[arg(long)]
    pub qa: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw this many answered documents as context; the other answered
    /// documents become targets.
    #[arg(long)]
    pub context_size: Option<usize>,
    /// Number of low-confidence targets to list.
    #[arg(long)]
    pub select: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Prepared answers to replay for the selected documents.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Fitted model to compare with `--truth`.
    #[arg(long, requires = "truth", conflicts_with_all = ["predictions", "qa"])]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predictions to score against `--qa`.
    #[arg(long, requires = "qa")]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories holding metrics.csv and/or calibration.csv.
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
