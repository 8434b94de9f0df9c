use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mlta",
    version,
    about = "Group-level emotion classification over multi-layer tweet networks",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key = value` lines, one per long flag of the subcommand.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a raw corpus into hashtag and keyword tokens.
    Preprocess(PreprocessArgs),
    /// Group cleaned tweets by label and build one network per group.
    BuildGraphs(BuildGraphsArgs),
    /// Train a model on a network file and write a checkpoint plus history.
    Train(TrainArgs),
    /// Score a checkpoint on a network file.
    Evaluate(EvaluateArgs),
    /// Train all three convolution kinds on the same split and compare.
    Ablate(AblateArgs),
    /// Binary sentiment scores on two-tweet networks, optionally next to
    /// other systems' predictions.
    PairBaseline(PairBaselineArgs),
    /// Write a synthetic corpus and a matching embedding table.
    GenSynth(GenSynthArgs),
    /// Compare backward-pass gradients with finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Primary embedding table (word2vec/GloVe text format).
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    /// Table consulted for tokens missing from the primary one.
    #[arg(long, value_name = "FILE")]
    pub fallback_embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Newline-delimited {"text", "label"} records.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Embedding tables whose words guide hashtag splitting.
    #[arg(long, value_name = "FILE")]
    pub vocabulary: Vec<PathBuf>,
    /// Tab-separated contraction table replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub contractions: Option<PathBuf>,
    /// Tab-separated emoji alias table replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub emoji: Option<PathBuf>,
    /// Keep only tweets whose predicted sentiment (one per line, in corpus
    /// order) matches their label's polarity.
    #[arg(long, value_name = "FILE")]
    pub sentiment_filter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildGraphsArgs {
    /// Cleaned tweets as written by `preprocess`.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Tweets per network; leftovers that do not fill a group are dropped.
    #[arg(long, default_value_t = 300)]
    pub group_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvArg {
    Gcn,
    Gatv2,
    Graphconv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Mean,
    MaxAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReadoutArg {
    Concat,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "graphconv")]
    pub conv: ConvArg,
    /// Attention heads for gatv2.
    #[arg(long, default_value_t = 5)]
    pub heads: usize,
    /// Output width of each convolution.
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub fc1: usize,
    #[arg(long, default_value_t = 64)]
    pub fc2: usize,
    /// Dropout after the last convolution of each layer.
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, value_enum, default_value = "mean")]
    pub pooling: PoolingArg,
    #[arg(long, value_enum, default_value = "concat")]
    pub readout: ReadoutArg,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, value_name = "FILE")]
    pub graphs: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Fraction of each class's networks used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Checkpoint of the epoch with the best test F1.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-epoch CSV; defaults to the checkpoint path with `.history.csv`.
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
    /// Held-out networks, written so `evaluate` can score them later.
    #[arg(long, value_name = "FILE")]
    pub test_out: Option<PathBuf>,
    /// Record wall-clock seconds per epoch in the history. Off keeps the
    /// file identical across runs.
    #[arg(long, value_enum, default_value = "off")]
    pub timing: Switch,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub graphs: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Machine-readable report with all counts and metrics.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairBaselineArgs {
    /// Networks built with --group-size 2.
    #[arg(long, value_name = "FILE")]
    pub graphs: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Another system's predictions as NAME=FILE, one sentiment per line in
    /// network order. Repeatable.
    #[arg(long, value_name = "NAME=FILE")]
    pub external: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long, value_name = "FILE")]
    pub out_corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out_embeddings: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub tweets_per_class: usize,
    #[arg(long, default_value_t = 60)]
    pub vocab_per_class: usize,
    #[arg(long, default_value_t = 60)]
    pub shared_vocab: usize,
    #[arg(long, default_value_t = 0.5)]
    pub hashtag_rate: f64,
    /// Probability that a class token comes from a random class.
    #[arg(long, default_value_t = 0.1)]
    pub noise_rate: f64,
    /// Probability that a token comes from the shared vocabulary.
    #[arg(long, default_value_t = 0.4)]
    pub shared_rate: f64,
    #[arg(long, default_value_t = 8)]
    pub hashtags_per_class: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, value_enum, default_value = "graphconv")]
    pub conv: ConvArg,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    /// Networks in the toy batch.
    #[arg(long, default_value_t = 3)]
    pub graphs: usize,
    /// Feature width of the toy model.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Convolution width of the toy model.
    #[arg(long, default_value_t = 3)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
