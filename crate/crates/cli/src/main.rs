mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{DataFiles, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "relmine", version, about = "Typed entailment-graph mining pipeline")]
pub struct Cli {
    /// TOML file with per-stage settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory whose filter.toml, stopwords.txt, morphology.toml and
    /// lexicon.tsv replace the built-in tables.
    #[arg(long, global = true, env = "RELMINE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest path triples and a type map into a typed graph directory.
    BuildTeg(BuildTegArgs),
    /// Score typed relation pairs and write accepted candidates.
    Discover(DiscoverArgs),
    /// Train relation embeddings from a typed graph.
    Train(TrainArgs),
    /// Tune and evaluate scorers on labeled candidates.
    Eval(EvalArgs),
    /// Serve the annotation HTTP API.
    AnnotateServe(AnnotateArgs),
    /// Mine meta rules from a candidate list.
    MineMeta(MineMetaArgs),
    /// Dump a graph as TSV, or aggregated annotations as a labeled TSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct BuildTegArgs {
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    /// Types kept per argument slot.
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimum pairs of a typed subrelation.
    #[arg(long = "rmin", alias = "r-min")]
    pub r_min: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write relations.tsv, extensions.tsv and typed.tsv.
    #[arg(long)]
    pub tsv: bool,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Graph directory from build-teg.
    #[arg(long)]
    pub teg: PathBuf,
    #[arg(long)]
    pub theta_relv: Option<f64>,
    #[arg(long)]
    pub theta_sigma: Option<f64>,
    #[arg(long)]
    pub theta_esr: Option<f64>,
    /// Minimum shared pairs before a pair is scored.
    #[arg(long = "rmin", alias = "r-min")]
    pub r_min: Option<usize>,
    /// Premises kept per hypothesis.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Sgns,
    Transe,
    Complex,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub teg: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Name relations by path and slot types instead of path alone.
    #[arg(long)]
    pub typed: bool,
    /// Relation vectors (text format).
    #[arg(long)]
    pub out: PathBuf,
    /// Entity vectors; graph models only.
    #[arg(long)]
    pub entities_out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Context radius of the word model; the whole line by default.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled data, split 25:75 into dev and test.
    #[arg(long, conflicts_with_all = ["dev", "test"], required_unless_present = "dev")]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "test")]
    pub dev: Option<PathBuf>,
    #[arg(long, requires = "dev")]
    pub test: Option<PathBuf>,
    /// Split seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML `[columns]` table naming the input columns.
    #[arg(long)]
    pub columns: Option<PathBuf>,
    /// Comma-separated scorer names; every available scorer by default.
    #[arg(long, value_delimiter = ',')]
    pub scorer: Vec<String>,
    /// Graph directory enabling the graph-based scorers.
    #[arg(long)]
    pub teg: Option<PathBuf>,
    /// Word vectors for the averaged-word scorer.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// NAME=PATH relation vectors keyed by path.
    #[arg(long)]
    pub relation_vectors: Vec<String>,
    /// NAME=PATH relation vectors keyed by path and slot types.
    #[arg(long)]
    pub typed_relation_vectors: Vec<String>,
    /// NAME=FORMAT:PATH rule collection (tsv, ppdb or synsets).
    #[arg(long)]
    pub rules: Vec<String>,
    #[arg(long, alias = "out")]
    pub report: PathBuf,
    /// Directory receiving dev.tsv and test.tsv.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Candidate TSV from discover, or a labeled TSV.
    #[arg(long)]
    pub cands: PathBuf,
    /// Graph directory supplying example entities.
    #[arg(long)]
    pub teg: Option<PathBuf>,
    /// Extra lexicon rows (lemma, 3sg, ing, pp, kind).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub qualification: Option<PathBuf>,
    /// Directory holding the record log; in memory when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub addr: Option<String>,
    /// Seconds a batch stays locked to its worker.
    #[arg(long)]
    pub lock_timeout: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MineMetaArgs {
    #[arg(long)]
    pub cands: PathBuf,
    #[arg(long)]
    pub min_freq: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Graph directory to dump as TSV.
    #[arg(long, conflicts_with_all = ["records", "cands"], required_unless_present = "records")]
    pub teg: Option<PathBuf>,
    /// Annotation state directory.
    #[arg(long, requires = "cands")]
    pub records: Option<PathBuf>,
    /// Candidates the records refer to.
    #[arg(long, requires = "records")]
    pub cands: Option<PathBuf>,
    /// Directory for a graph dump, file for gold labels.
    #[arg(long)]
    pub out: PathBuf,
}

pub struct Context {
    pub file: FileConfig,
    pub data: DataFiles,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let data = DataFiles {
        dir: cli.data_dir.clone().or_else(|| file.data_dir.clone()),
    };
    let ctx = Context { file, data };
    match cli.command {
        Command::BuildTeg(a) => commands::build_teg(&ctx, a),
        Command::Discover(a) => commands::discover(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::AnnotateServe(a) => commands::annotate_serve(&ctx, a),
        Command::MineMeta(a) => commands::mine_meta(&ctx, a),
        Command::Export(a) => commands::export(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
