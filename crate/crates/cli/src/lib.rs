//! `dfcm` command-line tool: vectorize a corpus, detect topics with DFCM or
//! EFCM, score them for coherence and sweep method comparisons.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use dfcm_core::topics::Method;

use crate::config::{ModelFlags, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "dfcm",
    version,
    about = "Fuzzy topic detection on deep autoencoder or SVD representations"
)]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, tokenize and TF-IDF weight a JSON-lines corpus.
    Vectorize(VectorizeArgs),
    /// Detect topics in a vectorized corpus.
    Detect(DetectArgs),
    /// Score a topic set with word-embedding coherence.
    Evaluate(EvaluateArgs),
    /// Sweep methods, topic counts and epochs and tabulate coherence.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON-lines file with one {"id", "text"} object per line.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// en, id, none or a stopword file (default en).
    #[arg(long)]
    pub stopwords: Option<String>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required = true)]
    pub seed: u64,
    /// Directory written by `vectorize`.
    #[arg(long = "input")]
    pub input_dir: Option<PathBuf>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// topics.json written by `detect`.
    #[arg(long)]
    pub topics: PathBuf,
    /// Word vectors in text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Report path (default: coherence.json next to the topics).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long = "input")]
    pub input_dir: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Methods to compare, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    /// Topic counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub topic_counts: Option<Vec<usize>>,
    /// Fine-tuning epoch counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub epoch_counts: Option<Vec<usize>>,
    #[command(flatten)]
    pub model: ModelFlags,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: dfcm_core::Error| e.to_string())
}

fn required(value: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    value.ok_or_else(|| CliError::Usage(format!("missing {flag} (flag or config key)")))
}

fn run_vectorize(args: VectorizeArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    cfg.corpus = args.corpus.or(cfg.corpus);
    cfg.stopwords = args.stopwords.or(cfg.stopwords);
    cfg.output_dir = args.output_dir.or(cfg.output_dir);
    let corpus = required(cfg.corpus, "--corpus")?;
    let out = required(cfg.output_dir, "--out")?;
    let stopwords = cfg.stopwords.unwrap_or_else(|| "en".into());
    let summary = commands::vectorize(&corpus, &stopwords, &out)?;
    println!("documents {}", summary.n_docs);
    println!("terms {}", summary.n_terms);
    println!("nonzeros {}", summary.nnz);
    Ok(())
}

fn run_detect(args: DetectArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    args.model.apply(&mut cfg)?;
    let input = required(args.input_dir.or(cfg.input_dir.clone()), "--input")?;
    let out = required(args.output_dir.or(cfg.output_dir.clone()), "--out")?;
    let topics = commands::detect(&cfg, args.seed, &input, &out)?;
    for topic in &topics.topics {
        println!("{}: {}", topic.id, topic.terms().join(" "));
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> CliResult<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let embeddings = required(args.embeddings.or(cfg.embeddings), "--embeddings")?;
    let dim = args.embedding_dim.or(cfg.embedding_dim);
    let out = args.out.unwrap_or_else(|| {
        args.topics
            .parent()
            .unwrap_or(Path::new("."))
            .join(commands::COHERENCE_FILE)
    });
    let report = commands::evaluate(&args.topics, &embeddings, dim, &out)?;
    for t in &report.per_topic {
        println!("topic {} score {:.4} ({} words)", t.topic, t.score, t.words_found);
    }
    for t in &report.skipped_topics {
        println!("topic {t} skipped");
    }
    match report.mean_score {
        Some(m) => println!("mean {m:.4}"),
        None => println!("mean n/a"),
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    args.model.apply(&mut cfg)?;
    if let Some(m) = args.methods {
        cfg.compare.methods = m;
    }
    if let Some(c) = args.topic_counts {
        cfg.compare.clusters = c;
    }
    if let Some(e) = args.epoch_counts {
        cfg.compare.epochs = e;
    }
    cfg.embedding_dim = args.embedding_dim.or(cfg.embedding_dim);
    let input = required(args.input_dir.or(cfg.input_dir.clone()), "--input")?;
    let embeddings = required(args.embeddings.or(cfg.embeddings.clone()), "--embeddings")?;
    let out = required(args.output_dir.or(cfg.output_dir.clone()), "--out")?;
    let rows = commands::compare(&cfg, args.seed, &input, &embeddings, &out)?;
    for row in &rows {
        let score = match (&row.outcome, row.mean_score()) {
            (Err(e), _) => format!("failed: {e}"),
            (Ok(_), Some(m)) => format!("{m:.4}"),
            (Ok(_), None) => "n/a".into(),
        };
        println!("{} c={} epochs={} {score}", row.method, row.clusters, row.epochs);
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Vectorize(a) => run_vectorize(a),
        Command::Detect(a) => run_detect(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Compare(a) => run_compare(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
