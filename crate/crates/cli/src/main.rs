//! `qclass`: preprocessing, featurization, DRR NN training and prediction,
//! evaluation, hyperparameter search, baselines and stacking.

mod commands;
mod config;
mod labels;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qclass::ErrorClass;

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] qclass::Error),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "config",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qclass", version, about = "Community question classification toolkit")]
struct Cli {
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving the outputs and the effective config.
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Emoji,
    Urls,
    Datetimes,
    Ordinals,
    Numbers,
    Shouty,
    Jargon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    TfidfSvm,
    Logreg,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StackKind {
    C1,
    C2,
}

#[derive(Debug, Default, Args)]
pub struct HpArgs {
    #[arg(long)]
    input_dim: Option<usize>,
    #[arg(long)]
    block_dim: Option<usize>,
    #[arg(long)]
    n_blocks: Option<usize>,
    #[arg(long)]
    input_dropout: Option<f64>,
    #[arg(long)]
    block_dropout: Option<f64>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    l2_lambda: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize question text; writes questions.jsonl.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Rule to enable; repeatable.
        #[arg(long, value_enum)]
        rule: Vec<Rule>,
        #[arg(long)]
        all_rules: bool,
        /// Jargon dictionary (`key<TAB>replacement`), replacing the built-in one.
        #[arg(long)]
        jargon: Option<PathBuf>,
    },
    /// Assemble 815-dim feature vectors; writes features.tsv.
    Featurize {
        #[arg(long)]
        questions: PathBuf,
        /// Labeled questions for the category statistics (default: --questions).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        wordvecs: Option<PathBuf>,
    },
    /// Train the cross-validation ensemble; writes checkpoints and manifest.txt.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        split_seeds: Option<Vec<u64>>,
        #[arg(long)]
        folds: Option<usize>,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Ensemble prediction; writes probs.tsv and labels.tsv.
    Predict {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Restrict and order predictions to these questions (default: every feature row).
        #[arg(long)]
        questions: Option<PathBuf>,
    },
    /// Score a label file against gold questions; writes metrics.json and metrics.txt.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        per_category: bool,
    },
    /// Randomized hyperparameter search; writes search_log.tsv and best_config.json.
    Hpo {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Train a classical baseline and predict the test questions.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Feature table for logreg and forest.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Also write out-of-fold training probabilities with this many folds.
        #[arg(long)]
        oof_folds: Option<usize>,
    },
    /// Train a stacker over probability matrices and predict.
    Stack {
        #[arg(long, value_enum)]
        kind: StackKind,
        /// Base-system probabilities for training, in system order; repeatable.
        #[arg(long = "train-probs", required = true)]
        train_probs: Vec<PathBuf>,
        /// Questions holding the gold labels of the training ids.
        #[arg(long)]
        labels: PathBuf,
        /// Base-system probabilities to predict (default: the training ones).
        #[arg(long = "predict-probs")]
        predict_probs: Vec<PathBuf>,
        #[arg(long)]
        bags: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.output_dir {
        cfg.paths.output_dir = Some(o);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli.command, cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
