use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "crossprune", version, about = "Query-aware extractive context compression")]
pub struct Cli {
    /// JSON settings file; any flag given on the command line wins.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress every record of a JSONL dataset.
    Compress(RunArgs),
    /// Information coverage and/or exact match of compressed contexts.
    Evaluate(EvaluateArgs),
    /// Rank answer tokens under several scorers and report mean MRR.
    MrrExperiment(MrrArgs),
    /// Compare retained sets and coverage across smoothing widths.
    SigmaSweep(SweepArgs),
    /// Validate a model artifact directory against its manifest.
    ExportCheck(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Fraction of words to keep, in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Gaussian smoothing width in words; 0 disables smoothing.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Half-width K of the smoothing kernel.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// single | chunk1 | chunk2
    #[arg(long)]
    pub strategy: Option<String>,
    /// cross-first | cross-total | self-attn | self-info | mock | random
    #[arg(long)]
    pub scorer: Option<String>,
    /// all | last | comma-separated layer indices
    #[arg(long)]
    pub layers: Option<String>,
    /// Exported model directory.
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    /// Word score table for the mock scorer.
    #[arg(long, value_name = "FILE")]
    pub mock_table: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Abort on the first malformed dataset line.
    #[arg(long)]
    pub strict: bool,
    /// Seed for the random scorer.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset key remap, e.g. `question=query`; repeatable.
    #[arg(long = "field", value_name = "NAME=KEY")]
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Coverage,
    Em,
    Both,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "coverage")]
    pub metric: MetricArg,
    /// Answer-generation endpoint URL, needed for exact match.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Evaluate several ratios in one run, e.g. `1.0,0.5`; replaces --tau.
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MrrArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Scorers to compare.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "cross-first,cross-total,self-attn,self-info,random"
    )]
    pub scorers: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// SVG bar chart.
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub sigmas: Vec<f64>,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// SVG line chart.
    #[arg(long, value_name = "FILE")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
}
