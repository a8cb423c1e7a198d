//! Command-line driver wiring the pipeline end to end: ingest, bench,
//! analyze, score-lexicon, export-model.
//!
//! Configuration comes from three layers: built-in defaults, an optional
//! TOML file (`--config`), and command-line flags, with later layers
//! winning. Every run writes a `manifest.json` into its output directory
//! holding the fully resolved configuration (master seed always explicit)
//! plus SHA-256 hashes of every input file, so a run can be reproduced
//! bit-for-bit from the manifest alone. Nothing in the pipeline reads the
//! clock or OS entropy; reruns with the same inputs are byte-identical.
//!
//! Exit codes: 0 when every requested output was produced, 2 when inputs
//! were unusable before any work started (missing paths, malformed config,
//! fatal corpus errors), 1 when work started but some outputs failed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, ReportModel};
use crate::classifiers::{self, Algorithm, ClassifierError, FittedModel, ModelConfig};
use crate::corpus::{
    self, AppRecord, CorpusError, ReviewRecord, RowReject, StudentRecord,
};
use crate::ensemble::{self, BaggedModel, BaggingConfig, EnsembleError, VoteMode};
use crate::eval::{
    self, BenchmarkModel, CellBagging, EvalError, EvaluationReport, Featurization,
    TableMetric, TokenizedCorpus,
};
use crate::lexicon::{self, LexiconError, Orientation};
use crate::seed;
use crate::textprep::{
    normalize, preprocess, tokenize, PreprocessConfig, StopwordError, StopwordSet,
};
use crate::vectorize::{
    fit_vocabulary, transform, VectorizeConfig, VectorizeError, VectorizedDataset, Vocabulary,
};

/// Master seed used when neither the config file nor `--seed` supplies one.
/// The resolved value is always written into the manifest.
pub const DEFAULT_SEED: u64 = 42;

const MANIFEST_FORMAT_VERSION: u32 = 1;
const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input path {path}: {source}")]
    MissingInput { path: PathBuf, source: io::Error },
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("unknown {what} {value:?}; expected one of: {allowed}")]
    InvalidName {
        what: &'static str,
        value: String,
        allowed: String,
    },
    #[error("invalid {what}: {message}")]
    InvalidValue { what: &'static str, message: String },
    #[error("model bundle {dir}: {message}")]
    Bundle { dir: PathBuf, message: String },
    #[error("corpus load failed: {0}")]
    Corpus(#[from] CorpusError),
    #[error("stopword list failed: {0}")]
    Stopwords(#[from] StopwordError),
    #[error("lexicon load failed: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("vectorization failed: {0}")]
    Vectorize(#[from] VectorizeError),
    #[error("training failed: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("ensemble failed: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("{failed} of {total} grid cells failed; details in the manifest")]
    CellsFailed { failed: usize, total: usize },
    #[error("worker pool failed: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code for this failure. Errors that make the inputs
    /// unusable before any work starts map to 2; everything after that
    /// (partial grids, write failures) maps to 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingInput { .. }
            | CliError::Config { .. }
            | CliError::InvalidName { .. }
            | CliError::InvalidValue { .. }
            | CliError::Bundle { .. }
            | CliError::Corpus(_)
            | CliError::Stopwords(_)
            | CliError::Lexicon(_) => 2,
            _ => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// run configuration

/// Input and output locations. Defaults point at the bundled fixtures so
/// the pipeline runs out of the box from the repository root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Labeled review corpus used for training.
    pub train_reviews: PathBuf,
    /// Held-out review corpus used for evaluation (the survey file).
    pub test_reviews: PathBuf,
    /// 13-column app metadata table.
    pub apps: PathBuf,
    /// Stopword list; the built-in list is used when absent.
    pub stopwords: Option<PathBuf>,
    /// Sentiment lexicon file.
    pub lexicon: PathBuf,
    /// Saved model bundle directory, enables the classifier report section.
    pub model: Option<PathBuf>,
    /// Root of all output directories.
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            train_reviews: PathBuf::from("fixtures/sample_reviews.csv"),
            test_reviews: PathBuf::from("fixtures/sample_survey.csv"),
            apps: PathBuf::from("fixtures/sample_apps.csv"),
            stopwords: None,
            lexicon: PathBuf::from("fixtures/lexicon.txt"),
            model: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Text cleaning toggles applied before vectorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSettings {
    pub filter_stopwords: bool,
    pub stem: bool,
}

impl Default for PrepSettings {
    fn default() -> Self {
        PrepSettings {
            filter_stopwords: true,
            stem: true,
        }
    }
}

/// Which grid cells the bench command runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    /// Model names as printed in report tables, e.g. "SVM", "NB(Bagging)".
    pub models: Vec<String>,
    /// Featurization names, e.g. "unigram", "unigram+bigram".
    pub featurizations: Vec<String>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            models: BenchmarkModel::ALL.iter().map(|m| m.name().to_string()).collect(),
            featurizations: Featurization::ALL.iter().map(|f| f.name().to_string()).collect(),
        }
    }
}

/// Ensemble settings for the bagged models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaggingSettings {
    pub n_estimators: usize,
    /// Vote rule: "hard" (majority) or "soft" (mean score).
    pub vote: String,
}

impl Default for BaggingSettings {
    fn default() -> Self {
        BaggingSettings {
            n_estimators: 10,
            vote: "hard".to_string(),
        }
    }
}

/// Settings for the exploratory report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSettings {
    /// Fraction of app rows assigned to the training split when the two
    /// splits' correlation matrices are compared.
    pub split_fraction: f64,
}

impl Default for AnalyzeSettings {
    fn default() -> Self {
        AnalyzeSettings { split_fraction: 0.8 }
    }
}

/// Which single grid cell the export-model command trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    pub model: String,
    pub featurization: String,
}

impl Default for ExportSettings {
    fn default() -> Self {
        ExportSettings {
            model: "NB".to_string(),
            featurization: "unigram".to_string(),
        }
    }
}

/// The complete, layerable run configuration. A TOML file may set any
/// subset of these; flags override the file. The manifest persists the
/// resolved value, with the seed made explicit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every random choice in the run. `None` only before
    /// resolution; the persisted config always carries a number.
    pub seed: Option<u64>,
    /// Worker threads for grid cells; 0 and 1 both mean sequential.
    pub jobs: usize,
    pub paths: PathsConfig,
    pub prep: PrepSettings,
    pub bench: BenchSettings,
    pub bagging: BaggingSettings,
    pub analyze: AnalyzeSettings,
    pub export: ExportSettings,
}

impl RunConfig {
    /// The resolved master seed. Only valid after [`resolve`] ran.
    pub fn master_seed(&self) -> u64 {
        self.seed.expect("seed resolved at startup")
    }
}

fn load_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::MissingInput {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|error| CliError::Config {
        path: path.to_path_buf(),
        message: error.to_string(),
    })
}

/// Make the defaulted fields explicit and validate cross-field rules.
fn resolve(config: &mut RunConfig) -> Result<(), CliError> {
    config.seed.get_or_insert(DEFAULT_SEED);
    if config.jobs == 0 {
        config.jobs = 1;
    }
    if config.bagging.n_estimators == 0 {
        return Err(CliError::InvalidValue {
            what: "bagging.n_estimators",
            message: "must be at least 1".to_string(),
        });
    }
    let fraction = config.analyze.split_fraction;
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(CliError::InvalidValue {
            what: "analyze.split_fraction",
            message: format!("{fraction} is not within [0, 1]"),
        });
    }
    Ok(())
}

fn parse_vote(text: &str) -> Result<VoteMode, CliError> {
    match text.to_ascii_lowercase().as_str() {
        "hard" => Ok(VoteMode::Hard),
        "soft" => Ok(VoteMode::SoftAverage),
        _ => Err(CliError::InvalidName {
            what: "vote",
            value: text.to_string(),
            allowed: "hard, soft".to_string(),
        }),
    }
}

fn parse_models(names: &[String]) -> Result<Vec<BenchmarkModel>, CliError> {
    names
        .iter()
        .map(|name| {
            BenchmarkModel::parse(name).ok_or_else(|| CliError::InvalidName {
                what: "model",
                value: name.clone(),
                allowed: BenchmarkModel::ALL
                    .iter()
                    .map(|m| m.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
        })
        .collect()
}

fn parse_featurizations(names: &[String]) -> Result<Vec<Featurization>, CliError> {
    names
        .iter()
        .map(|name| {
            Featurization::parse(name).ok_or_else(|| CliError::InvalidName {
                what: "featurization",
                value: name.clone(),
                allowed: Featurization::ALL
                    .iter()
                    .map(|f| f.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(
    name = "appsent",
    version,
    about = "Sentiment pipeline for app reviews: ingest, benchmark, analyze"
)]
pub struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; recorded in the manifest even when defaulted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory root.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the input corpora and write canonical cleaned copies.
    Ingest(IngestArgs),
    /// Train and evaluate the model x featurization grid.
    Bench(BenchArgs),
    /// Build the exploratory report over apps, reviews and survey.
    Analyze(AnalyzeArgs),
    /// Score reviews with the sentiment lexicon.
    ScoreLexicon(ScoreLexiconArgs),
    /// Train one grid cell and save it as a reloadable bundle.
    ExportModel(ExportModelArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Labeled training reviews CSV.
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Held-out test reviews CSV.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    /// App metadata CSV.
    #[arg(long, value_name = "FILE")]
    apps: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Labeled training reviews CSV.
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Held-out test reviews CSV.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    /// Stopword list file.
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Comma-separated model names, e.g. "NB,SVM,LR(Bagging)".
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    models: Option<Vec<String>>,
    /// Comma-separated featurization names, e.g. "unigram,unigram+bigram".
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    featurizations: Option<Vec<String>>,
    /// Ensemble size for the bagged cells.
    #[arg(long, value_name = "N")]
    estimators: Option<usize>,
    /// Vote rule for bagged cells: hard or soft.
    #[arg(long, value_name = "RULE")]
    vote: Option<String>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Labeled training reviews CSV.
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Student survey CSV.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    /// App metadata CSV.
    #[arg(long, value_name = "FILE")]
    apps: Option<PathBuf>,
    /// Sentiment lexicon file.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Stopword list file.
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Saved model bundle directory; enables the classifier section.
    #[arg(long, value_name = "DIR")]
    model_dir: Option<PathBuf>,
    /// Fraction of app rows assigned to the training split.
    #[arg(long, value_name = "F")]
    split_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct ScoreLexiconArgs {
    /// Reviews to score; defaults to the training corpus path.
    #[arg(long, value_name = "FILE")]
    reviews: Option<PathBuf>,
    /// Sentiment lexicon file.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportModelArgs {
    /// Labeled training reviews CSV.
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Stopword list file.
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    /// Grid model name, e.g. "SVM" or "LR(Bagging)".
    #[arg(long, value_name = "NAME")]
    model: Option<String>,
    /// Featurization name, e.g. "unigram".
    #[arg(long, value_name = "NAME")]
    featurization: Option<String>,
    /// Ensemble size when exporting a bagged model.
    #[arg(long, value_name = "N")]
    estimators: Option<usize>,
    /// Vote rule when exporting a bagged model: hard or soft.
    #[arg(long, value_name = "RULE")]
    vote: Option<String>,
}

/// Parse the process arguments, run the selected command, and return the
/// process exit code.
pub fn run() -> u8 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.common.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(value) = cli.common.seed {
        config.seed = Some(value);
    }
    if let Some(value) = cli.common.jobs {
        config.jobs = value;
    }
    if let Some(value) = &cli.common.out {
        config.paths.out = value.clone();
    }

    match &cli.command {
        Command::Ingest(args) => {
            override_path(&mut config.paths.train_reviews, &args.train);
            override_path(&mut config.paths.test_reviews, &args.test);
            override_path(&mut config.paths.apps, &args.apps);
            resolve(&mut config)?;
            cmd_ingest(&config)
        }
        Command::Bench(args) => {
            override_path(&mut config.paths.train_reviews, &args.train);
            override_path(&mut config.paths.test_reviews, &args.test);
            if args.stopwords.is_some() {
                config.paths.stopwords = args.stopwords.clone();
            }
            if let Some(models) = &args.models {
                config.bench.models = models.clone();
            }
            if let Some(featurizations) = &args.featurizations {
                config.bench.featurizations = featurizations.clone();
            }
            if let Some(n) = args.estimators {
                config.bagging.n_estimators = n;
            }
            if let Some(vote) = &args.vote {
                config.bagging.vote = vote.clone();
            }
            resolve(&mut config)?;
            cmd_bench(&config)
        }
        Command::Analyze(args) => {
            override_path(&mut config.paths.train_reviews, &args.train);
            override_path(&mut config.paths.test_reviews, &args.test);
            override_path(&mut config.paths.apps, &args.apps);
            override_path(&mut config.paths.lexicon, &args.lexicon);
            if args.stopwords.is_some() {
                config.paths.stopwords = args.stopwords.clone();
            }
            if args.model_dir.is_some() {
                config.paths.model = args.model_dir.clone();
            }
            if let Some(fraction) = args.split_fraction {
                config.analyze.split_fraction = fraction;
            }
            resolve(&mut config)?;
            cmd_analyze(&config)
        }
        Command::ScoreLexicon(args) => {
            override_path(&mut config.paths.train_reviews, &args.reviews);
            override_path(&mut config.paths.lexicon, &args.lexicon);
            resolve(&mut config)?;
            cmd_score_lexicon(&config)
        }
        Command::ExportModel(args) => {
            override_path(&mut config.paths.train_reviews, &args.train);
            if args.stopwords.is_some() {
                config.paths.stopwords = args.stopwords.clone();
            }
            if let Some(model) = &args.model {
                config.export.model = model.clone();
            }
            if let Some(featurization) = &args.featurization {
                config.export.featurization = featurization.clone();
            }
            if let Some(n) = args.estimators {
                config.bagging.n_estimators = n;
            }
            if let Some(vote) = &args.vote {
                config.bagging.vote = vote.clone();
            }
            resolve(&mut config)?;
            cmd_export_model(&config)
        }
    }
}

fn override_path(slot: &mut PathBuf, flag: &Option<PathBuf>) {
    if let Some(value) = flag {
        *slot = value.clone();
    }
}

// ---------------------------------------------------------------------------
// manifests and file plumbing

#[derive(Debug, Clone, Serialize)]
struct CellFailure {
    model: String,
    featurization: String,
    error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: u32,
    command: &'static str,
    /// The fully resolved configuration, master seed explicit.
    config: &'a RunConfig,
    /// Input path -> SHA-256 of its bytes. Directories contribute one
    /// entry per file, in sorted order.
    inputs: BTreeMap<String, String>,
    /// Grid cells that failed; empty for non-grid commands.
    failures: Vec<CellFailure>,
    /// Sections that were skipped, with reasons.
    notices: Vec<String>,
}

/// Every input path this run will read must already exist; exits with
/// code 2 otherwise, naming the first missing path.
fn require_inputs(paths: &[&Path]) -> Result<(), CliError> {
    for path in paths {
        if !path.exists() {
            return Err(CliError::MissingInput {
                path: path.to_path_buf(),
                source: io::Error::new(io::ErrorKind::NotFound, "no such file or directory"),
            });
        }
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn add_input_hash(map: &mut BTreeMap<String, String>, path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|entry| entry.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for entry in entries {
            add_input_hash(map, &entry)?;
        }
    } else {
        let bytes = fs::read(path)?;
        map.insert(path.display().to_string(), sha256_hex(&bytes));
    }
    Ok(())
}

fn hash_inputs(paths: &[&Path]) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for path in paths {
        add_input_hash(&mut map, path)?;
    }
    Ok(map)
}

/// Write through a temporary file and rename, so a crash never leaves a
/// half-written output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    command: &'static str,
    config: &RunConfig,
    inputs: BTreeMap<String, String>,
    failures: Vec<CellFailure>,
    notices: Vec<String>,
) -> Result<(), CliError> {
    let manifest = Manifest {
        version: MANIFEST_FORMAT_VERSION,
        command,
        config,
        inputs,
        failures,
        notices,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &bytes)
}

fn resolve_stopwords(config: &RunConfig) -> Result<StopwordSet, CliError> {
    match &config.paths.stopwords {
        None => Ok(StopwordSet::builtin()),
        Some(path) => Ok(StopwordSet::from_path(path)?),
    }
}

fn preprocess_settings(config: &RunConfig) -> Result<PreprocessConfig, CliError> {
    Ok(PreprocessConfig {
        stopwords: resolve_stopwords(config)?,
        filter_stopwords: config.prep.filter_stopwords,
        stem: config.prep.stem,
    })
}

fn tokenized_corpus(
    records: &[ReviewRecord],
    prep: &PreprocessConfig,
) -> Result<TokenizedCorpus, EvalError> {
    let documents = records
        .iter()
        .enumerate()
        .map(|(i, record)| preprocess(i, &record.raw_text, prep))
        .collect();
    let labels = records.iter().map(|record| record.label).collect();
    TokenizedCorpus::new(documents, labels)
}

fn orientation_str(orientation: Orientation) -> &'static str {
    match orientation {
        Orientation::Positive => "Positive",
        Orientation::Negative => "Negative",
        Orientation::Neutral => "Neutral",
    }
}

fn optional_to_string<T: ToString>(value: &Option<T>) -> String {
    value.as_ref().map(T::to_string).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Serialize)]
struct ReviewLoadSection {
    input_rows: usize,
    replaced_sequences: usize,
    loaded: usize,
    neutral: usize,
    rejects: Vec<RowReject>,
}

#[derive(Serialize)]
struct AppLoadSection {
    input_rows: usize,
    replaced_sequences: usize,
    loaded: usize,
    rejects: Vec<RowReject>,
}

#[derive(Serialize)]
struct LoadReport {
    version: u32,
    train_reviews: ReviewLoadSection,
    test_reviews: ReviewLoadSection,
    apps: AppLoadSection,
}

fn review_section(load: &corpus::ReviewCorpusLoad) -> ReviewLoadSection {
    ReviewLoadSection {
        input_rows: load.stats.input_rows,
        replaced_sequences: load.stats.replaced_sequences,
        loaded: load.records.len(),
        neutral: load.neutral.len(),
        rejects: load.rejects.clone(),
    }
}

fn cleaned_reviews_csv(records: &[ReviewRecord]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["app", "text", "rating", "label"])?;
    for record in records {
        writer.write_record([
            record.app_name.as_str(),
            record.raw_text.as_str(),
            &optional_to_string(&record.rating),
            &record.label.to_string(),
        ])?;
    }
    Ok(writer.into_inner().expect("vec writer never fails"))
}

fn cleaned_apps_csv(records: &[AppRecord]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "app",
        "category",
        "rating",
        "reviews_count",
        "size_bytes",
        "installs",
        "type",
        "price",
        "content_rating",
        "genres",
        "last_updated",
        "current_version",
        "android_version",
    ])?;
    for record in records {
        writer.write_record([
            record.app_name.as_str(),
            record.category.as_str(),
            &optional_to_string(&record.rating),
            &record.reviews_count.to_string(),
            &optional_to_string(&record.size_bytes),
            &record.installs.to_string(),
            &record.app_type.to_string(),
            &record.price.to_string(),
            record.content_rating.as_str(),
            record.genres.as_str(),
            &optional_to_string(&record.last_updated),
            record.current_version.as_str(),
            record.android_version.as_str(),
        ])?;
    }
    Ok(writer.into_inner().expect("vec writer never fails"))
}

fn cmd_ingest(config: &RunConfig) -> Result<(), CliError> {
    let paths = &config.paths;
    require_inputs(&[&paths.train_reviews, &paths.test_reviews, &paths.apps])?;

    let train = corpus::load_review_corpus(&paths.train_reviews)?;
    let test = corpus::load_review_corpus(&paths.test_reviews)?;
    let apps = corpus::load_app_metadata(&paths.apps)?;

    let out_dir = paths.out.join("ingest");
    fs::create_dir_all(&out_dir)?;

    write_atomic(
        &out_dir.join("cleaned_train_reviews.csv"),
        &cleaned_reviews_csv(&train.records)?,
    )?;
    write_atomic(
        &out_dir.join("cleaned_test_reviews.csv"),
        &cleaned_reviews_csv(&test.records)?,
    )?;
    write_atomic(&out_dir.join("cleaned_apps.csv"), &cleaned_apps_csv(&apps.records)?)?;

    let report = LoadReport {
        version: MANIFEST_FORMAT_VERSION,
        train_reviews: review_section(&train),
        test_reviews: review_section(&test),
        apps: AppLoadSection {
            input_rows: apps.stats.input_rows,
            replaced_sequences: apps.stats.replaced_sequences,
            loaded: apps.records.len(),
            rejects: apps.rejects.clone(),
        },
    };
    let mut report_bytes = serde_json::to_vec_pretty(&report)?;
    report_bytes.push(b'\n');
    write_atomic(&out_dir.join("load_report.json"), &report_bytes)?;

    let inputs = hash_inputs(&[&paths.train_reviews, &paths.test_reviews, &paths.apps])?;
    write_manifest(&out_dir, "ingest", config, inputs, Vec::new(), Vec::new())?;

    println!(
        "train reviews: {} loaded, {} neutral, {} rejected of {} rows",
        train.records.len(),
        train.neutral.len(),
        train.rejects.len(),
        train.stats.input_rows
    );
    println!(
        "test reviews: {} loaded, {} neutral, {} rejected of {} rows",
        test.records.len(),
        test.neutral.len(),
        test.rejects.len(),
        test.stats.input_rows
    );
    println!(
        "apps: {} loaded, {} rejected of {} rows",
        apps.records.len(),
        apps.rejects.len(),
        apps.stats.input_rows
    );
    println!("wrote {}", out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench

fn confusion_csv(reports: &[EvaluationReport]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["model", "featurization", "tp", "fp", "fn", "tn"])?;
    for report in reports {
        writer.write_record([
            report.model.name(),
            report.featurization.name(),
            &report.confusion.true_positives.to_string(),
            &report.confusion.false_positives.to_string(),
            &report.confusion.false_negatives.to_string(),
            &report.confusion.true_negatives.to_string(),
        ])?;
    }
    Ok(writer.into_inner().expect("vec writer never fails"))
}

fn cmd_bench(config: &RunConfig) -> Result<(), CliError> {
    let paths = &config.paths;
    let mut required: Vec<&Path> = vec![&paths.train_reviews, &paths.test_reviews];
    if let Some(stopwords) = &paths.stopwords {
        required.push(stopwords);
    }
    require_inputs(&required)?;

    let models = parse_models(&config.bench.models)?;
    let featurizations = parse_featurizations(&config.bench.featurizations)?;
    let bagging = CellBagging {
        n_estimators: config.bagging.n_estimators,
        vote: parse_vote(&config.bagging.vote)?,
    };

    let train_load = corpus::load_review_corpus(&paths.train_reviews)?;
    let test_load = corpus::load_review_corpus(&paths.test_reviews)?;
    for (name, load) in [("train", &train_load), ("test", &test_load)] {
        if !load.rejects.is_empty() {
            log::warn!("{name} corpus: {} rows rejected", load.rejects.len());
        }
    }

    let prep = preprocess_settings(config)?;
    let train_corpus = tokenized_corpus(&train_load.records, &prep)?;
    let test_corpus = tokenized_corpus(&test_load.records, &prep)?;

    // One vocabulary per featurization, fitted on the training documents
    // and shared by every cell in that column. A column that fails to
    // vectorize fails all of its cells but leaves the others running.
    type Column = Result<(VectorizedDataset, VectorizedDataset), String>;
    let columns: Vec<(Featurization, Column)> = featurizations
        .iter()
        .map(|&featurization| {
            let (low, high) = featurization.ngram_range();
            let vectorize_config = VectorizeConfig::with_ngram_range(low, high);
            let column = (|| {
                let vocabulary = fit_vocabulary(&train_corpus.documents, &vectorize_config)?;
                let train_matrix = train_corpus
                    .documents
                    .iter()
                    .map(|doc| transform(doc, &vocabulary, &vectorize_config))
                    .collect::<Result<Vec<_>, _>>()?;
                let test_matrix = test_corpus
                    .documents
                    .iter()
                    .map(|doc| transform(doc, &vocabulary, &vectorize_config))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok::<_, VectorizeError>((
                    VectorizedDataset {
                        matrix: train_matrix,
                        labels: train_corpus.labels.clone(),
                        vocabulary: vocabulary.clone(),
                    },
                    VectorizedDataset {
                        matrix: test_matrix,
                        labels: test_corpus.labels.clone(),
                        vocabulary,
                    },
                ))
            })()
            .map_err(|error| error.to_string());
            (featurization, column)
        })
        .collect();

    // Row-major cell order: all featurizations of the first model, then
    // the next model. Results keep this order no matter how the pool
    // schedules them, so assembly is deterministic.
    let cells: Vec<(BenchmarkModel, Featurization)> = models
        .iter()
        .flat_map(|&model| featurizations.iter().map(move |&f| (model, f)))
        .collect();

    let master_seed = config.master_seed();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    let results: Vec<Result<EvaluationReport, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(model, featurization)| {
                let fail = |error: String| CellFailure {
                    model: model.name().to_string(),
                    featurization: featurization.name().to_string(),
                    error,
                };
                let column = &columns
                    .iter()
                    .find(|(f, _)| *f == featurization)
                    .expect("every cell's featurization has a column")
                    .1;
                match column {
                    Err(message) => Err(fail(message.clone())),
                    Ok((train_ds, test_ds)) => eval::run_cell_with(
                        train_ds,
                        test_ds,
                        &test_corpus.labels,
                        model,
                        featurization,
                        master_seed,
                        bagging,
                    )
                    .map_err(|error| fail(error.to_string())),
                }
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(report) => reports.push(report),
            Err(failure) => failures.push(failure),
        }
    }

    let out_dir = paths.out.join("bench");
    fs::create_dir_all(&out_dir)?;

    let mut reports_bytes = Vec::new();
    eval::reports_to_writer(&reports, &mut reports_bytes)?;
    write_atomic(&out_dir.join("reports.json"), &reports_bytes)?;

    let mut accuracy_bytes = Vec::new();
    eval::metric_table_csv(&reports, TableMetric::Accuracy, &mut accuracy_bytes)?;
    write_atomic(&out_dir.join("accuracy.csv"), &accuracy_bytes)?;

    let mut f_measure_bytes = Vec::new();
    eval::metric_table_csv(&reports, TableMetric::FMeasure, &mut f_measure_bytes)?;
    write_atomic(&out_dir.join("f_measure.csv"), &f_measure_bytes)?;

    write_atomic(&out_dir.join("confusion.csv"), &confusion_csv(&reports)?)?;

    let mut input_paths: Vec<&Path> = vec![&paths.train_reviews, &paths.test_reviews];
    if let Some(stopwords) = &paths.stopwords {
        input_paths.push(stopwords);
    }
    let inputs = hash_inputs(&input_paths)?;
    let total = cells.len();
    let failed = failures.len();
    write_manifest(&out_dir, "bench", config, inputs, failures, Vec::new())?;

    for report in &reports {
        println!(
            "{} / {}: accuracy {:.4}, f-measure {:.4}",
            report.model.name(),
            report.featurization.name(),
            report.accuracy,
            report.f_measure
        );
    }
    println!("wrote {}", out_dir.display());

    if failed > 0 {
        return Err(CliError::CellsFailed { failed, total });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model bundles (export-model writes them, analyze consumes them)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BundleKind {
    Single,
    Bagged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleMeta {
    version: u32,
    /// Grid model name, e.g. "SVM" or "NB(Bagging)".
    model: String,
    /// Featurization the vocabulary was fitted with.
    featurization: String,
    kind: BundleKind,
    /// Cleaning toggles the training corpus went through; held-out text
    /// must go through the same ones.
    prep: PrepSettings,
    /// Master seed the bundle was trained under.
    master_seed: u64,
}

enum BundleModel {
    Single(FittedModel),
    Bagged(BaggedModel),
}

struct Bundle {
    meta: BundleMeta,
    vocabulary: Vocabulary,
    model: BundleModel,
}

impl Bundle {
    fn report_model(&self) -> ReportModel<'_> {
        match &self.model {
            BundleModel::Single(model) => ReportModel::Single(model),
            BundleModel::Bagged(model) => ReportModel::Bagged(model),
        }
    }
}

fn bundle_error(dir: &Path, message: impl ToString) -> CliError {
    CliError::Bundle {
        dir: dir.to_path_buf(),
        message: message.to_string(),
    }
}

fn load_bundle(dir: &Path) -> Result<Bundle, CliError> {
    let meta_file =
        File::open(dir.join("meta.json")).map_err(|e| bundle_error(dir, format!("meta.json: {e}")))?;
    let meta: BundleMeta = serde_json::from_reader(meta_file)
        .map_err(|e| bundle_error(dir, format!("meta.json: {e}")))?;
    if meta.version != BUNDLE_FORMAT_VERSION {
        return Err(bundle_error(
            dir,
            format!("unsupported bundle version {}", meta.version),
        ));
    }
    let vocabulary = Vocabulary::from_path(dir.join("vocabulary.json"))
        .map_err(|e| bundle_error(dir, format!("vocabulary.json: {e}")))?;
    let model = match meta.kind {
        BundleKind::Single => BundleModel::Single(
            FittedModel::from_path(dir.join("model.json"))
                .map_err(|e| bundle_error(dir, format!("model.json: {e}")))?,
        ),
        BundleKind::Bagged => BundleModel::Bagged(
            BaggedModel::load(dir.join("ensemble"))
                .map_err(|e| bundle_error(dir, format!("ensemble: {e}")))?,
        ),
    };
    Ok(Bundle {
        meta,
        vocabulary,
        model,
    })
}

/// Vectorize held-out reviews with a bundle's vocabulary, cleaning them
/// with the same toggles the bundle was trained under.
fn vectorize_with_bundle(
    bundle: &Bundle,
    records: &[ReviewRecord],
    stopwords: StopwordSet,
    dir: &Path,
) -> Result<VectorizedDataset, CliError> {
    let featurization = Featurization::parse(&bundle.meta.featurization).ok_or_else(|| {
        bundle_error(
            dir,
            format!("unknown featurization {:?}", bundle.meta.featurization),
        )
    })?;
    let (low, high) = featurization.ngram_range();
    let vectorize_config = VectorizeConfig::with_ngram_range(low, high);
    let prep = PreprocessConfig {
        stopwords,
        filter_stopwords: bundle.meta.prep.filter_stopwords,
        stem: bundle.meta.prep.stem,
    };
    let matrix = records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let document = preprocess(i, &record.raw_text, &prep);
            transform(&document, &bundle.vocabulary, &vectorize_config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = records.iter().map(|record| record.label).collect();
    Ok(VectorizedDataset {
        matrix,
        labels,
        vocabulary: bundle.vocabulary.clone(),
    })
}

// ---------------------------------------------------------------------------
// analyze

/// Deterministic split of the app rows for the correlation comparison:
/// a seeded shuffle, then the first `fraction` of rows form the training
/// split. Derived from the master seed only, so it is stable across runs
/// and independent of every other seeded choice.
fn split_apps(
    records: &[AppRecord],
    fraction: f64,
    master_seed: u64,
) -> (Vec<AppRecord>, Vec<AppRecord>) {
    let mut shuffled: Vec<AppRecord> = records.to_vec();
    let mut rng = seed::rng(seed::derive(master_seed, seed::fnv1a("apps-split")));
    shuffled.shuffle(&mut rng);
    let cut = ((shuffled.len() as f64) * fraction).round() as usize;
    let cut = cut.min(shuffled.len());
    let test = shuffled.split_off(cut);
    (shuffled, test)
}

fn cmd_analyze(config: &RunConfig) -> Result<(), CliError> {
    let paths = &config.paths;
    let mut required: Vec<&Path> = vec![
        &paths.apps,
        &paths.train_reviews,
        &paths.test_reviews,
        &paths.lexicon,
    ];
    if let Some(stopwords) = &paths.stopwords {
        required.push(stopwords);
    }
    if let Some(model_dir) = &paths.model {
        required.push(model_dir);
    }
    require_inputs(&required)?;

    let apps = corpus::load_app_metadata(&paths.apps)?;
    let survey = corpus::load_student_survey(&paths.test_reviews)?;
    let train_reviews = corpus::load_review_corpus(&paths.train_reviews)?;
    let lexicon_load = lexicon::load_lexicon(&paths.lexicon)?;

    let mut reviews: Vec<ReviewRecord> = train_reviews.records.clone();
    reviews.extend(survey.records.iter().map(StudentRecord::to_review));
    let scored = lexicon::score_corpus(&reviews, &lexicon_load.lexicon);

    let (train_apps, test_apps) = split_apps(
        &apps.records,
        config.analyze.split_fraction,
        config.master_seed(),
    );

    let mut notices = Vec::new();
    let bundle = match &paths.model {
        Some(dir) => Some(load_bundle(dir)?),
        None => {
            notices.push(
                "no model bundle configured; classifier section omitted".to_string(),
            );
            None
        }
    };
    let held_out = match (&bundle, &paths.model) {
        (Some(bundle), Some(dir)) => {
            let survey_reviews: Vec<ReviewRecord> =
                survey.records.iter().map(StudentRecord::to_review).collect();
            Some(vectorize_with_bundle(
                bundle,
                &survey_reviews,
                resolve_stopwords(config)?,
                dir,
            )?)
        }
        _ => None,
    };
    let model_arg = bundle
        .as_ref()
        .zip(held_out.as_ref())
        .map(|(bundle, dataset)| (bundle.report_model(), dataset));

    let report = analysis::rq_report(&train_apps, &test_apps, &survey.records, &scored, model_arg)?;

    let out_dir = paths.out.join("analyze");
    let written = analysis::export_rq_report(&report, &out_dir)?;

    let mut input_paths: Vec<&Path> = vec![
        &paths.apps,
        &paths.train_reviews,
        &paths.test_reviews,
        &paths.lexicon,
    ];
    if let Some(stopwords) = &paths.stopwords {
        input_paths.push(stopwords);
    }
    if let Some(model_dir) = &paths.model {
        input_paths.push(model_dir);
    }
    let inputs = hash_inputs(&input_paths)?;
    write_manifest(&out_dir, "analyze", config, inputs, Vec::new(), notices.clone())?;

    for notice in &notices {
        eprintln!("notice: {notice}");
    }
    println!("wrote {} report files to {}", written.len(), out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// score-lexicon

fn cmd_score_lexicon(config: &RunConfig) -> Result<(), CliError> {
    let paths = &config.paths;
    require_inputs(&[&paths.train_reviews, &paths.lexicon])?;

    let load = corpus::load_review_corpus(&paths.train_reviews)?;
    let lexicon_load = lexicon::load_lexicon(&paths.lexicon)?;
    if !lexicon_load.rejected.is_empty() {
        log::warn!("lexicon: {} rows rejected", lexicon_load.rejected.len());
    }

    let scored = lexicon::score_corpus(&load.records, &lexicon_load.lexicon);

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["app", "label", "polarity", "subjectivity", "orientation", "text"])?;
    for (record, score) in &scored {
        writer.write_record([
            record.app_name.as_str(),
            &record.label.to_string(),
            &score.polarity.to_string(),
            &score.subjectivity.to_string(),
            orientation_str(score.orientation),
            record.raw_text.as_str(),
        ])?;
    }
    // Neutral-labeled rows are excluded from the binary task but still
    // get lexicon scores; they ship with an empty label column.
    for neutral in &load.neutral {
        let tokens = tokenize(&normalize(&neutral.raw_text));
        let score = lexicon::score(&tokens, &lexicon_load.lexicon);
        writer.write_record([
            neutral.app_name.as_str(),
            "",
            &score.polarity.to_string(),
            &score.subjectivity.to_string(),
            orientation_str(score.orientation),
            neutral.raw_text.as_str(),
        ])?;
    }
    let bytes = writer.into_inner().expect("vec writer never fails");

    let out_dir = paths.out.join("score-lexicon");
    fs::create_dir_all(&out_dir)?;
    write_atomic(&out_dir.join("scored.csv"), &bytes)?;

    let inputs = hash_inputs(&[&paths.train_reviews, &paths.lexicon])?;
    write_manifest(&out_dir, "score-lexicon", config, inputs, Vec::new(), Vec::new())?;

    println!(
        "scored {} labeled and {} neutral reviews; wrote {}",
        scored.len(),
        load.neutral.len(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// export-model

fn base_algorithm(model: BenchmarkModel) -> Algorithm {
    match model {
        BenchmarkModel::NaiveBayes | BenchmarkModel::BaggedNaiveBayes => Algorithm::NaiveBayes,
        BenchmarkModel::LogisticRegression | BenchmarkModel::BaggedLogisticRegression => {
            Algorithm::LogisticRegression
        }
        BenchmarkModel::Svm => Algorithm::Svm,
        BenchmarkModel::Knn => Algorithm::Knn,
        BenchmarkModel::RandomForest => Algorithm::RandomForest,
    }
}

fn cmd_export_model(config: &RunConfig) -> Result<(), CliError> {
    let paths = &config.paths;
    let mut required: Vec<&Path> = vec![&paths.train_reviews];
    if let Some(stopwords) = &paths.stopwords {
        required.push(stopwords);
    }
    require_inputs(&required)?;

    let model = parse_models(std::slice::from_ref(&config.export.model))?[0];
    let featurization = parse_featurizations(std::slice::from_ref(&config.export.featurization))?[0];
    let vote = parse_vote(&config.bagging.vote)?;

    let train_load = corpus::load_review_corpus(&paths.train_reviews)?;
    let prep = preprocess_settings(config)?;
    let train_corpus = tokenized_corpus(&train_load.records, &prep)?;

    let (low, high) = featurization.ngram_range();
    let vectorize_config = VectorizeConfig::with_ngram_range(low, high);
    let vocabulary = fit_vocabulary(&train_corpus.documents, &vectorize_config)?;
    let matrix = train_corpus
        .documents
        .iter()
        .map(|doc| transform(doc, &vocabulary, &vectorize_config))
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = VectorizedDataset {
        matrix,
        labels: train_corpus.labels.clone(),
        vocabulary: vocabulary.clone(),
    };

    // Same per-cell seed derivation as the benchmark grid, so the exported
    // model is the exact model that grid cell would have trained.
    let master_seed = config.master_seed();
    let train_seed = eval::cell_seed(master_seed, model, featurization);
    let base_config = ModelConfig::default_for(base_algorithm(model), train_seed);

    let out_dir = paths.out.join("model");
    fs::create_dir_all(&out_dir)?;

    let kind = match model {
        BenchmarkModel::BaggedLogisticRegression | BenchmarkModel::BaggedNaiveBayes => {
            let bagging_config = BaggingConfig {
                base: base_config,
                n_estimators: config.bagging.n_estimators,
                seed: seed::derive(train_seed, 1),
                vote,
            };
            let bagged = ensemble::fit_bagging(&dataset, &bagging_config)?;
            bagged.save(out_dir.join("ensemble"))?;
            BundleKind::Bagged
        }
        _ => {
            let fitted = classifiers::fit(&dataset, &base_config)?;
            fitted.to_path(out_dir.join("model.json"))?;
            BundleKind::Single
        }
    };
    vocabulary.to_path(out_dir.join("vocabulary.json"))?;

    let meta = BundleMeta {
        version: BUNDLE_FORMAT_VERSION,
        model: model.name().to_string(),
        featurization: featurization.name().to_string(),
        kind,
        prep: config.prep.clone(),
        master_seed,
    };
    let mut meta_bytes = serde_json::to_vec_pretty(&meta)?;
    meta_bytes.push(b'\n');
    write_atomic(&out_dir.join("meta.json"), &meta_bytes)?;

    let mut input_paths: Vec<&Path> = vec![&paths.train_reviews];
    if let Some(stopwords) = &paths.stopwords {
        input_paths.push(stopwords);
    }
    let inputs = hash_inputs(&input_paths)?;
    write_manifest(&out_dir, "export-model", config, inputs, Vec::new(), Vec::new())?;

    println!(
        "saved {} / {} bundle to {}",
        model.name(),
        featurization.name(),
        out_dir.display()
    );
    Ok(())
}
