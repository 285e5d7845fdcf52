use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use overlap_minimax::io::DEFAULT_NOISE_NEIGHBOURS;
use overlap_minimax::lipschitz::DEFAULT_KNN_K;

#[derive(Debug, Parser)]
#[command(name = "overlap-minimax", version, about = "Minimax inference for average treatment effects under limited overlap")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// All intervals (AIPW, AIPWP, MP, M, MC) for one dataset, as JSON.
    Analyze(AnalyzeArgs),
    /// Non-overlap interval across smoothness levels, one row per level.
    Sensitivity(AnalyzeArgs),
    /// Monte Carlo coverage of every method for one or more configurations.
    Coverage(ExperimentArgs),
    /// Draws one dataset from a built-in design and writes it as CSV.
    Simulate(SimulateArgs),
    /// Mean non-overlap interval length under each data-collection option.
    SampleOptions(ExperimentArgs),
    /// Confidence sequence under continual collection.
    Confseq(ConfseqArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Destination file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format; inferred from the `--output` extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Treat degenerate-estimand warnings as errors (exit code 4).
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Dataset CSV with columns x1..xd, y, z, pi and optionally sigma.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fixed overlap threshold.
    #[arg(long, conflicts_with = "epsilon_set")]
    pub epsilon: Option<f64>,
    /// Candidate thresholds; the one with the shortest trimmed AIPW interval is used.
    #[arg(long, value_delimiter = ',')]
    pub epsilon_set: Option<Vec<f64>>,
    /// Explicit Lipschitz constant(s).
    #[arg(long = "L", value_delimiter = ',', conflicts_with = "percentiles")]
    pub lipschitz: Option<Vec<f64>>,
    /// Percentile(s) for the data-driven Lipschitz constant.
    #[arg(long, value_delimiter = ',')]
    pub percentiles: Option<Vec<f64>>,
    /// Neighbours for the noise estimate when the CSV has no sigma column.
    #[arg(long, default_value_t = DEFAULT_NOISE_NEIGHBOURS)]
    pub j: usize,
    /// Neighbours for the k-NN outcome regression.
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub k: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "L", value_delimiter = ',', conflicts_with = "percentiles")]
    pub lipschitz: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub percentiles: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignName {
    Example1,
    Collection,
    CaseStudy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON design parameters (`{"kind": ..., ...}`); overrides `--design`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DesignName::Example1)]
    pub design: DesignName,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConfseqArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "L")]
    pub lipschitz: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run this many replications and report coverage instead of one sequence.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Replication to report when `--reps` is absent.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}
