use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sevbench", version, about = "Severity monitoring pipeline: embed, sample, annotate, estimate, benchmark")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Config file; defaults to ./sevbench.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic pool: interactions, gold annotations and mixture embeddings.
    Synth(SynthArgs),
    /// Embed interactions into a vector file.
    Embed(EmbedArgs),
    /// Choose k interactions to annotate.
    Sample(SampleArgs),
    /// Send a sample to a running annotation service.
    Enqueue(EnqueueArgs),
    /// Estimate severity proportions from an annotated sample.
    Estimate(EstimateArgs),
    /// Bootstrap comparison of coreset and uniform sampling.
    EvalSampling(EvalArgs),
    /// Shared evaluation datasets.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Decision-tree utilities.
    Tree {
        #[command(subcommand)]
        command: TreeCommand,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    /// Norm of each cluster mean.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Standard deviation around the cluster mean.
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Comma-separated cluster mixing weights.
    #[arg(long, value_delimiter = ',')]
    pub mixing: Vec<f64>,
    /// Per-cluster label distributions over Sev0,Sev1,Sev2,NoError, e.g. `0.1,0.2,0.3,0.4;0.25,0.25,0.25,0.25`.
    #[arg(long)]
    pub label_dists: Option<String>,
    #[arg(long, default_value_t = 0.9)]
    pub label_signal: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EmbedderArg {
    FeatureHash,
    ExternalFile,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub interactions: PathBuf,
    #[arg(long, value_enum, default_value = "feature_hash")]
    pub embedder: EmbedderArg,
    /// Vector dimension; 256 for feature hashing, the file's own for external vectors.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: Option<u32>,
    /// Precomputed vectors, for `--embedder external_file`.
    #[arg(long)]
    pub vectors_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Giga,
    Uniform,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_enum, default_value = "giga")]
    pub solver: SolverArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnqueueArgs {
    #[arg(long)]
    pub coreset: PathBuf,
    #[arg(long)]
    pub interactions: PathBuf,
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub service: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub annotators_per_item: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub coreset: PathBuf,
    /// Annotation records for the sampled items.
    #[arg(long)]
    pub labels: PathBuf,
    /// Full-pool gold records; adds error against the exact proportions.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Mean,
    Median,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub bootstrap: u64,
    #[arg(long, default_value_t = 0.8)]
    pub subpool_fraction: f64,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    /// Spacing of the extra uniform budgets used to match coreset errors; 0 disables them.
    #[arg(long, default_value_t = 25)]
    pub uniform_grid: usize,
    /// Spread iterations over all cores. Output is identical either way.
    #[arg(long)]
    pub parallel: bool,
    /// Curves file; `reductions.csv` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Split newly annotated candidates into development and holdout deltas.
    Partition(PartitionArgs),
    /// Append a delta to the latest manifest of its split.
    Merge(MergeArgs),
    /// Compare candidate responses against a baseline on one manifest.
    Replay(ReplayArgs),
    /// Overwrite gold labels after post-launch annotation.
    Adopt(AdoptArgs),
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub period: String,
    /// Annotation records of the candidates.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Directory holding the existing manifests; deltas are written here too.
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub holdout_fraction: f64,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub delta: PathBuf,
    /// Prior manifest; defaults to the latest earlier period of the same split in `--dir`.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSONL of `{"id", "response"}` (or interactions, using `answer`).
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Report timestamp (RFC 3339); defaults to now.
    #[arg(long)]
    pub at: Option<String>,
}

#[derive(Debug, Args)]
pub struct AdoptArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub period: String,
    /// Defaults to the manifest's directory.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    #[arg(long, default_value = "sevbench-data")]
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub lease_ttl_minutes: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub annotators_per_item: u64,
    /// Decision tree to serve; defaults to the shipped tree.
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TreeCommand {
    /// Check a tree for structural problems.
    Validate {
        /// Defaults to the shipped tree.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Write the shipped tree.
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
