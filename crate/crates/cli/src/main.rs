use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcfuse::evaluation::MethodId;

mod commands;

/// Exit status for usage and configuration errors.
const EXIT_USAGE: u8 = 1;
/// Exit status for runtime and data errors.
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hcfuse",
    version,
    about = "Hierarchical clustering ensembles with Renyi and genetic consensus fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse one dataset with one method and write the consensus artifacts.
    Fuse(FuseArgs),
    /// Compare methods over several datasets and write report tables.
    Benchmark(BenchmarkArgs),
    /// Summarize a matrix, dendrogram, GA result or report file.
    Inspect(InspectArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Min-max scale every feature to [0, 1] before computing distances.
    #[arg(long)]
    scale: bool,
    /// Label column handling: none, drop-last, drop-first or drop-named:<col>.
    #[arg(long, default_value = "none")]
    label_policy: String,
}

#[derive(Debug, Clone, Args)]
struct PipelineArgs {
    /// Number of bagged hierarchies L.
    #[arg(long, default_value_t = 10)]
    ensemble_size: usize,
    /// Fraction of points drawn into each bag.
    #[arg(long, default_value_t = 0.8)]
    bag_fraction: f64,
    /// GA population size K.
    #[arg(long, default_value_t = 100)]
    population: usize,
    /// GA generations, counting the initial population.
    #[arg(long, default_value_t = 100)]
    generations: usize,
    #[arg(long, default_value_t = 0.8)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    mutation_rate: f64,
    /// Standard deviation of the Gaussian mutation noise.
    #[arg(long, default_value_t = 0.05)]
    mutation_sigma: f64,
    /// Chromosomes copied unchanged into each generation.
    #[arg(long, default_value_t = 1)]
    elitism: usize,
    /// Base seed; repeat r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, env = "HCFUSE_OUT", default_value = "hcfuse-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    data_opts: DataArgs,
    /// One of max, euclid, amean, gmean, hmean, min, genetic.
    #[arg(long, value_parser = parse_method)]
    method: MethodId,
    /// Number of seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also write the bagged ensemble (trees, matrices, manifest).
    #[arg(long)]
    dump_ensemble: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Dataset CSVs; names are taken from the file stems.
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Dataset registry JSON (alternative to --data).
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Restrict a registry to these dataset names.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    #[command(flatten)]
    data_opts: DataArgs,
    /// Comma-separated methods to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_method,
          default_value = "max,euclid,amean,gmean,hmean,min,genetic")]
    methods: Vec<MethodId>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Artifact produced by this tool.
    path: PathBuf,
    /// Reference dissimilarity matrix CSV for a CPCC readout.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// blobs or rings.
    kind: String,
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Blob count or ring count.
    #[arg(long, default_value_t = 3)]
    groups: usize,
    /// Blob standard deviation or ring radial noise.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination CSV.
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<MethodId, String> {
    s.parse::<MethodId>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fuse(a) => commands::fuse(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
