mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::TrainFlags;

#[derive(Debug, Parser)]
#[command(
    name = "scalevec",
    version,
    about = "Train and analyze CBOW embeddings across context-window scales"
)]
struct Cli {
    /// Root for default output locations
    #[arg(long, global = true, env = "SCALEVEC_OUT")]
    out_root: Option<PathBuf>,
    /// Log more (repeat for debug output)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a plain-text corpus and write its vocabulary and token ids
    Preprocess {
        input: PathBuf,
        /// Output directory [default: $SCALEVEC_OUT/corpus]
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Words seen fewer times are dropped
        #[arg(long, default_value_t = scalevec::corpus::DEFAULT_MIN_COUNT)]
        min_count: u64,
    },
    /// Train one embedding at a single scale
    Train {
        /// Directory written by `preprocess`
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
        /// Embedding file [default: $SCALEVEC_OUT/beta<B>_seed<S>.stv]
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also store the output vectors
        #[arg(long)]
        with_output: bool,
    },
    /// Train a grid of scales and replicas; reruns resume
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
        /// Scales, e.g. "1..100" or "1,2,5,10"
        #[arg(long)]
        scales: Option<String>,
        #[arg(long)]
        replicas: Option<u32>,
        /// Train several cells at once
        #[arg(long)]
        parallel_cells: bool,
        #[arg(long)]
        with_output: bool,
        /// Sweep directory [default: $SCALEVEC_OUT/sweep]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Per-relation analogy accuracy for every cell of a sweep
    EvalAnalogy {
        #[arg(long)]
        sweep: PathBuf,
        /// Question file with `: relation` headers
        #[arg(long)]
        questions: PathBuf,
        /// Search only the most frequent words
        #[arg(long, default_value_t = scalevec::analogy::DEFAULT_RESTRICT_K)]
        restrict_k: usize,
        /// Output directory [default: $SCALEVEC_OUT/analogy]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Neighbor catalogs, similarity curves, crossovers and peak histograms
    Neighbors {
        #[arg(long)]
        sweep: PathBuf,
        /// Center words, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        center: Vec<String>,
        /// Catalog sizes
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,50,100")]
        n: Vec<usize>,
        /// Catalog size whose members are checked for crossovers [default: smallest N]
        #[arg(long)]
        crossover_n: Option<usize>,
        /// Output directory [default: $SCALEVEC_OUT/neighbors]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Convert between the native and the reference embedding formats
    Export {
        input: PathBuf,
        output: PathBuf,
        /// Target format [default: the one the input is not in]
        #[arg(long, value_enum)]
        to: Option<Format>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Native,
    Reference,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_target(false)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
