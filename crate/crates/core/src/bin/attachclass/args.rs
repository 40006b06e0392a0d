use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "attachclass", version, about = "Turn-level attachment style classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled transcript corpus.
    Synth(SynthArgs),
    /// Print document and turn label distributions and turn-length histograms.
    Stats(StatsArgs),
    /// Concatenate patient turns into instances of a minimum length.
    Segment(SegmentArgs),
    /// Stratified document-level test split and cross-validation folds.
    Split(SplitArgs),
    /// Domain-adaptive masked-language-model pretraining.
    Dapt(DaptArgs),
    /// Fine-tune a classifier on one fold.
    Train(TrainArgs),
    /// Predict label probabilities for instances.
    Predict(PredictArgs),
    /// Majority vote over several prediction files.
    Vote(VoteArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Full pipeline over a list of minimum input lengths.
    Sweep(SweepArgs),
    /// Render figures and tables from a sweep output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (JSON); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub marker_strength: Option<f64>,
    /// Omit therapist turns.
    #[arg(long)]
    pub no_therapist: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub corpus: PathBuf,
    /// Lower bin boundaries in words, starting at 0.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20,50,100")]
    pub bins: Vec<usize>,
    /// Write the histogram as SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub min_length: usize,
    /// Drop a trailing multi-turn chunk that stays below the minimum.
    #[arg(long)]
    pub drop_trailing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Strategy {
    RepeatedHoldout,
    Partition,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub test_count: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.2)]
    pub eval_fraction: f64,
    #[arg(long, value_enum, default_value = "repeated-holdout")]
    pub strategy: Strategy,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Backend name: reference or tiny-transformer.
    #[arg(long)]
    pub backend: Option<String>,
    /// Backend config JSON (including its "name").
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DaptArgs {
    /// Transcript JSONL; every turn's text is used.
    #[arg(long)]
    pub texts: PathBuf,
    /// MLM config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub duplication_factor: Option<usize>,
    #[arg(long)]
    pub mask_probability: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub instances: PathBuf,
    /// Splits file written by `split`.
    #[arg(long)]
    pub splits: PathBuf,
    #[arg(long)]
    pub fold: usize,
    /// Training config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Pretrained encoder checkpoint (directory or checkpoint.json).
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_seq_length: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint directory or checkpoint.json.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    /// Only predict the test documents of this splits file.
    #[arg(long)]
    pub test_of: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Prediction files, one per model.
    #[arg(required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Instance file with gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions or votes JSONL.
    #[arg(long)]
    pub pred: PathBuf,
    /// `default` or a JSON file holding a 3x3 matrix (rows gold, columns predicted).
    #[arg(long, default_value = "default")]
    pub costs: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the confusion matrix as SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment config JSON; flags override its fields.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Re-run a previous sweep from its manifest and check the metrics match.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub min_lengths: Option<Vec<usize>>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of a sweep.
    pub run_dir: PathBuf,
    /// Where figures go; defaults to the run directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also plot the turn-length histogram of this corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20,50,100")]
    pub bins: Vec<usize>,
}
