//! `topicwise` command-line driver.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use topicwise::corpus::Split;
use topicwise::eval::Protocol;
use topicwise::select::SelectionMode;
use topicwise::synth::SignalScope;

use crate::error::CliError;

#[derive(Debug, Parser, Serialize)]
#[command(name = "topicwise", version, about = "Topic-wise multi-modal depression score regression")]
struct Cli {
    /// Worker threads; defaults to every available core. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Collect distinct interviewer sentences and cluster near-duplicates.
    BuildDict(BuildDictArgs),
    /// Write per-session topic segment tables.
    Segment(SegmentArgs),
    /// Write one feature row per session plus the layout sidecar.
    Featurize(FeaturizeArgs),
    /// Run feature selection and report the kept features.
    Select(SelectArgs),
    /// Fit selection and one model on every input session.
    Train(TrainArgs),
    /// Cross-validated grid search over models and feature counts.
    Grid(GridArgs),
    /// Stratified k-fold cross validation of one configuration.
    Cv(CvArgs),
    /// Train on one split and score another.
    Holdout(HoldoutArgs),
    /// Generate a synthetic corpus with planted signal.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
struct Dictionaries {
    /// Topic dictionary (TOML); the shipped 83-topic example by default.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// Word-category dictionary; the shipped example by default.
    #[arg(long)]
    words: Option<PathBuf>,
    /// Key-topic answer rules (TOML); the shipped example by default.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct Input {
    /// Session manifest; sessions are featurized on the fly.
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    manifest: Option<PathBuf>,
    /// Feature table written by `featurize`.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Manifest splits to use.
    #[arg(long, value_delimiter = ',', default_value = "train,dev")]
    splits: Vec<Split>,
    #[command(flatten)]
    dictionaries: Dictionaries,
}

#[derive(Debug, Args, Serialize)]
struct Selection {
    #[arg(long, default_value = "two_step")]
    mode: SelectionMode,
    /// Non-improving expansions before the subset search stops.
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Largest number of open subsets kept per expansion.
    #[arg(long, default_value_t = 512)]
    open_cap: usize,
}

#[derive(Debug, Args, Serialize)]
struct ModelChoice {
    /// sgd_squared, svr_linear, random_forest or mean.
    #[arg(long, default_value = "sgd_squared")]
    model: String,
    /// Hyperparameter override, repeatable: `--hyper epochs=100`.
    #[arg(long = "hyper", value_name = "KEY=VALUE")]
    hypers: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct BuildDictArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Largest edit distance joining two sentences into one cluster.
    #[arg(long, default_value_t = 3)]
    max_dist: usize,
    /// Sentences seen fewer times are left out of the draft dictionary.
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    topics: Option<PathBuf>,
    /// Largest edit distance between an utterance and a trigger.
    #[arg(long, default_value_t = 3)]
    max_edits: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "train,dev,test")]
    splits: Vec<Split>,
    /// Whole-interview 391-dim vectors instead of the topic-wise layout.
    #[arg(long)]
    context_unaware: bool,
    #[command(flatten)]
    dictionaries: Dictionaries,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SelectArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    selection: Selection,
    /// Most features kept after ranking.
    #[arg(long, default_value_t = 46)]
    max_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    selection: Selection,
    #[command(flatten)]
    model: ModelChoice,
    /// Features fed to the model.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GridArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    selection: Selection,
    /// Comma list of models: sgd_squared, svr_linear, random_forest[N], mean,
    /// `forests` (every standard forest size) or `default` (everything).
    #[arg(long, default_value = "default")]
    models: String,
    /// Hyperparameter override applied to every grid model.
    #[arg(long = "hyper", value_name = "KEY=VALUE")]
    hypers: Vec<String>,
    /// Feature counts, e.g. `1-46` or `2,4,8`.
    #[arg(long, default_value = "1-46")]
    k_range: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CvArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    selection: Selection,
    #[command(flatten)]
    model: ModelChoice,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    /// Clip predictions to 0..=24 before scoring.
    #[arg(long)]
    clamp: bool,
    /// Also run the mean and (with --manifest) context-unaware baselines.
    #[arg(long)]
    baselines: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct HoldoutArgs {
    /// Manifest whose splits provide the training and holdout sessions.
    #[arg(long, conflicts_with_all = ["train", "holdout"], required_unless_present_all = ["train", "holdout"])]
    manifest: Option<PathBuf>,
    /// dev: train on train, score dev. test: train on train+dev, score test.
    #[arg(long, default_value = "dev")]
    protocol: Protocol,
    /// Training feature table (instead of --manifest).
    #[arg(long, requires = "holdout")]
    train: Option<PathBuf>,
    /// Holdout feature table (instead of --manifest).
    #[arg(long, requires = "train")]
    holdout: Option<PathBuf>,
    #[command(flatten)]
    dictionaries: Dictionaries,
    #[command(flatten)]
    selection: Selection,
    #[command(flatten)]
    model: ModelChoice,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    clamp: bool,
    /// Permit sessions shared by both sets; the report is marked as a sanity run.
    #[arg(long)]
    allow_overlap: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// Generator spec (TOML); the built-in default otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep planted channels over the topic window or the whole session.
    #[arg(long)]
    scope: Option<SignalScope>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match topicwise::exec::with_jobs(cli.jobs, || commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
