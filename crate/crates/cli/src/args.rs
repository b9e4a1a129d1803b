use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mentalgen", version, about = "EEG-driven interior design: datasets, models, sessions")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labelled dataset.
    Synth(SynthArgs),
    /// Window a dataset and write its feature vectors.
    Preprocess(PreprocessArgs),
    /// Cluster feature-labelled datasets and score label agreement per k.
    ClusterEval(ClusterEvalArgs),
    /// Train an intent model with cross-validation.
    Train(TrainArgs),
    /// Predict the command of one window of a recording.
    Predict(PredictArgs),
    /// Run a scripted design session against the mock generator.
    Simulate(SimulateArgs),
    /// Rebuild a session from its log and print the satisfaction report.
    Report(ReportArgs),
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Three command classes with α, β or θ boosted.
    Commands,
    /// Five feature-labelled classes laid out on a plane.
    FiveClusters,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthKind::Commands)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    /// White-noise standard deviation in µV.
    #[arg(long, default_value_t = 20.0)]
    pub noise: f64,
    #[arg(long, default_value = "synthetic")]
    pub participant: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Feature pipeline settings (TOML); defaults otherwise.
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ClusterEvalArgs {
    /// One dataset directory per participant; repeat for several.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    /// Write the full JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// `scale` or a positive number.
    #[arg(long, default_value = "scale")]
    pub gamma: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Also write the cross-validation report here.
    #[arg(long)]
    pub cv_report: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// EEG CSV recording.
    #[arg(long)]
    pub recording: PathBuf,
    /// Window start in seconds.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RatingPolicyKind {
    /// 7 for the predicted candidate, 4 for the rest.
    PreferPredicted,
    /// Uniform ratings drawn with the global seed.
    Random,
    /// Ratings read from `--script`.
    Script,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose segments supply one window per round, cycling.
    #[arg(long, conflicts_with = "recording", required_unless_present = "recording")]
    pub dataset: Option<PathBuf>,
    /// Recording cut into consecutive windows, one per round, cycling.
    #[arg(long)]
    pub recording: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub rounds: usize,
    #[arg(long, value_enum, default_value_t = RatingPolicyKind::PreferPredicted)]
    pub rating_policy: RatingPolicyKind,
    /// JSON rating script for `--rating-policy script`.
    #[arg(long, required_if_eq("rating_policy", "script"))]
    pub script: Option<PathBuf>,
    /// Output directory: session log, images, report.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "sim")]
    pub session_id: String,
    #[arg(long, default_value = "simulated")]
    pub participant: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Session JSONL log.
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
}
