mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RetrieverChoice};
use protoret::dataset::{LeakageMode, SplitKind};
use protoret::ErrorCategory;

#[derive(Parser)]
#[command(
    name = "protoret",
    version,
    about = "Prototype retrieval and dataset construction pipeline"
)]
struct Cli {
    /// TOML pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, lemmatize and tag corpora into a new sentence store.
    Ingest(IngestArgs),
    /// Mark store sentences that equal a CommonGen target as excluded.
    ExcludeTargets(ExcludeArgs),
    /// Sample the pre-training pool of sentence ids.
    SamplePool(SamplePoolArgs),
    /// Build the lemma inverted index over a store.
    BuildIndex(BuildIndexArgs),
    /// Retrieve prototypes for one concept set and print them as JSON.
    Retrieve(RetrieveArgs),
    /// Build labelled (concept set, sentence) pairs for scorer training.
    BuildPairs(BuildPairsArgs),
    /// Train the feature scorer.
    TrainScorer(TrainScorerArgs),
    /// Build leakage-filtered pre-training examples from the pool.
    BuildPretrain(BuildPretrainArgs),
    /// Build fine-tuning examples for a CommonGen split.
    BuildFinetune(BuildFinetuneArgs),
    /// Score predictions against references.
    Evaluate(EvaluateArgs),
    /// Serve a trained feature scorer over the scorer line protocol.
    ServeScorer(ServeScorerArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Corpus file as NAME=PATH; repeatable. NAME becomes the source label.
    #[arg(long = "corpus", required = true, value_name = "NAME=PATH")]
    pub corpora: Vec<String>,
    /// Corpus files hold pre-tagged `surface<TAB>lemma<TAB>POS` rows.
    #[arg(long)]
    pub pretagged: bool,
    /// Replace an existing store.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct ExcludeArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// CommonGen JSONL files whose targets are excluded; defaults to the
    /// configured train, dev and test paths.
    #[arg(long = "commongen")]
    pub commongen: Vec<PathBuf>,
}

#[derive(Args)]
pub struct SamplePoolArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct ScorerArgs {
    #[arg(long, value_enum)]
    pub retriever: Option<RetrieverChoice>,
    /// Feature scorer model (for `--retriever feature`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Scorer program and arguments (for `--retriever external`).
    #[arg(long, num_args = 1.., allow_hyphen_values = true, value_terminator = ";")]
    pub scorer_cmd: Option<Vec<String>>,
    /// Scorer TCP address (for `--retriever external`).
    #[arg(long)]
    pub scorer_addr: Option<String>,
    /// Score only the top candidates by match count.
    #[arg(long)]
    pub max_candidates: Option<usize>,
}

#[derive(Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Comma-separated concept words.
    #[arg(long)]
    pub concepts: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Write the list here (plus a manifest) instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildPairsArgs {
    /// CommonGen training split; defaults to `paths.train`.
    #[arg(long)]
    pub commongen: Option<PathBuf>,
    #[arg(long)]
    pub neg_per_pos: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainScorerArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildPretrainArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Held-out CommonGen files (repeatable); defaults to `paths.test`.
    #[arg(long = "held-out")]
    pub held_out: Vec<PathBuf>,
    /// Also filter against `paths.dev`.
    #[arg(long)]
    pub include_dev: bool,
    #[arg(long, value_enum)]
    pub leakage_mode: Option<LeakageModeArg>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    #[arg(long)]
    pub min_concepts: Option<usize>,
    #[arg(long)]
    pub max_concepts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BuildFinetuneArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: SplitArg,
    /// CommonGen file for the split; defaults to the configured path.
    #[arg(long)]
    pub commongen: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the matching retriever for concept sets the scorer fails on.
    #[arg(long)]
    pub fallback: bool,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// CommonGen JSONL with references; defaults to `paths.dev`.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Leave per-instance scores out of the report.
    #[arg(long)]
    pub summary_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeScorerArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Listen on this TCP address instead of stdin/stdout.
    #[arg(long)]
    pub listen: Option<String>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum LeakageModeArg {
    Exact,
    Subset,
}

impl From<LeakageModeArg> for LeakageMode {
    fn from(m: LeakageModeArg) -> Self {
        match m {
            LeakageModeArg::Exact => LeakageMode::Exact,
            LeakageModeArg::Subset => LeakageMode::Subset,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for SplitKind {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitKind::Train,
            SplitArg::Dev => SplitKind::Dev,
            SplitArg::Test => SplitKind::Test,
        }
    }
}

fn category(err: &anyhow::Error) -> ErrorCategory {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<protoret::Error>() {
            return e.category();
        }
        if cause.downcast_ref::<ConfigError>().is_some() {
            return ErrorCategory::Config;
        }
    }
    ErrorCategory::Data
}

// Context chain joined with ": ", skipping causes already quoted by the
// message above them.
fn chain_message(err: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if message.contains(&text) {
            continue;
        }
        if !message.is_empty() {
            message.push_str(": ");
        }
        message.push_str(&text);
    }
    message
}

fn report(category: ErrorCategory, message: &str) -> ExitCode {
    let line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{}]: {line}", category.as_str());
    ExitCode::from(category.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return report(ErrorCategory::Config, first.trim_start_matches("error: "));
        }
    };
    match commands::run(cli.command, cli.config.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(category(&err), &chain_message(&err)),
    }
}
