//! Confusion-matrix metrics and the model-by-featurization benchmark grid.
//!
//! The grid trains seven models (five base classifiers plus bagged LR and
//! bagged NB) under three n-gram featurizations and reports precision,
//! recall, F-measure, and accuracy per cell. Positive is the positive
//! class everywhere. Zero-denominator metrics are defined as 0 so a
//! degenerate cell produces a report instead of aborting the grid.

use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, Algorithm, ClassifierError, ModelConfig};
use crate::corpus::Label;
use crate::ensemble::{self, BaggingConfig, EnsembleError, VoteMode};
use crate::seed;
use crate::textprep::TokenizedDocument;
use crate::vectorize::{
    fit_vocabulary, transform, SparseVector, VectorizeConfig, VectorizeError, VectorizedDataset,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and truth lists differ in length: {predictions} vs {truths}")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("no (prediction, truth) pairs to evaluate")]
    Empty,
    #[error("corpus documents and labels differ in length: {documents} vs {labels}")]
    CorpusShape { documents: usize, labels: usize },
    #[error("report file is invalid: {0}")]
    InvalidSerialization(String),
    #[error("unsupported report format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Counts over predicted/actual label pairs; Positive is the positive
/// class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    /// tp / (tp + fp); 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// tp / (tp + fn); 0 when nothing is actually positive.
    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f_measure(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// (tp + tn) / total; 0 on an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.true_positives + self.true_negatives, self.total())
    }
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Tally the four-way confusion counts over aligned prediction/truth pairs.
pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Label::Positive, Label::Positive) => c.true_positives += 1,
            (Label::Positive, Label::Negative) => c.false_positives += 1,
            (Label::Negative, Label::Positive) => c.false_negatives += 1,
            (Label::Negative, Label::Negative) => c.true_negatives += 1,
        }
    }
    Ok(c)
}

/// Rows of the benchmark grid: the five base classifiers plus the two
/// bagged variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkModel {
    NaiveBayes,
    LogisticRegression,
    Svm,
    Knn,
    RandomForest,
    BaggedLogisticRegression,
    BaggedNaiveBayes,
}

impl BenchmarkModel {
    pub const ALL: [BenchmarkModel; 7] = [
        BenchmarkModel::NaiveBayes,
        BenchmarkModel::LogisticRegression,
        BenchmarkModel::Svm,
        BenchmarkModel::Knn,
        BenchmarkModel::RandomForest,
        BenchmarkModel::BaggedLogisticRegression,
        BenchmarkModel::BaggedNaiveBayes,
    ];

    /// Row label in exported tables.
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkModel::NaiveBayes => "NB",
            BenchmarkModel::LogisticRegression => "LR",
            BenchmarkModel::Svm => "SVM",
            BenchmarkModel::Knn => "KNN",
            BenchmarkModel::RandomForest => "RF",
            BenchmarkModel::BaggedLogisticRegression => "LR(Bagging)",
            BenchmarkModel::BaggedNaiveBayes => "NB(Bagging)",
        }
    }

    /// Inverse of `name`, for config parsing.
    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Columns of the benchmark grid: cumulative n-gram featurizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Featurization {
    Unigram,
    UnigramBigram,
    UnigramBigramTrigram,
}

impl Featurization {
    pub const ALL: [Featurization; 3] = [
        Featurization::Unigram,
        Featurization::UnigramBigram,
        Featurization::UnigramBigramTrigram,
    ];

    pub fn ngram_range(self) -> (usize, usize) {
        match self {
            Featurization::Unigram => (1, 1),
            Featurization::UnigramBigram => (1, 2),
            Featurization::UnigramBigramTrigram => (1, 3),
        }
    }

    /// Column label in exported tables.
    pub fn name(self) -> &'static str {
        match self {
            Featurization::Unigram => "unigram",
            Featurization::UnigramBigram => "unigram+bigram",
            Featurization::UnigramBigramTrigram => "unigram+bigram+trigram",
        }
    }

    /// Inverse of `name`, for config parsing.
    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// One grid cell: the model, the featurization, the confusion counts, and
/// the four derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: BenchmarkModel,
    pub featurization: Featurization,
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
}

impl EvaluationReport {
    pub fn new(
        model: BenchmarkModel,
        featurization: Featurization,
        confusion: ConfusionMatrix,
    ) -> Self {
        EvaluationReport {
            model,
            featurization,
            confusion,
            precision: confusion.precision(),
            recall: confusion.recall(),
            f_measure: confusion.f_measure(),
            accuracy: confusion.accuracy(),
        }
    }
}

/// Preprocessed documents paired with their labels, ready to vectorize
/// under any featurization.
#[derive(Debug, Clone)]
pub struct TokenizedCorpus {
    pub documents: Vec<TokenizedDocument>,
    pub labels: Vec<Label>,
}

impl TokenizedCorpus {
    pub fn new(
        documents: Vec<TokenizedDocument>,
        labels: Vec<Label>,
    ) -> Result<Self, EvalError> {
        if documents.len() != labels.len() {
            return Err(EvalError::CorpusShape {
                documents: documents.len(),
                labels: labels.len(),
            });
        }
        Ok(TokenizedCorpus { documents, labels })
    }
}

/// The per-cell training seed: a fixed mix of the master seed with the
/// model and featurization names, so a cell's result does not depend on
/// which other cells run or in what order. Public so a model exported for
/// one cell reproduces exactly what the benchmark grid trained there.
pub fn cell_seed(master_seed: u64, model: BenchmarkModel, featurization: Featurization) -> u64 {
    seed::derive(
        master_seed,
        seed::fnv1a(model.name()) ^ seed::fnv1a(featurization.name()),
    )
}

/// Ensemble settings for the bagged grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBagging {
    pub n_estimators: usize,
    pub vote: VoteMode,
}

impl Default for CellBagging {
    fn default() -> Self {
        CellBagging {
            n_estimators: 10,
            vote: VoteMode::Hard,
        }
    }
}

/// Train and evaluate a single grid cell on already-vectorized data. The
/// cell derives its own training seed from the master seed and the cell
/// coordinates, so results match `run_matrix` regardless of which other
/// cells run.
pub fn run_cell(
    train: &VectorizedDataset,
    test: &VectorizedDataset,
    test_labels: &[Label],
    model: BenchmarkModel,
    featurization: Featurization,
    master_seed: u64,
) -> Result<EvaluationReport, EvalError> {
    run_cell_with(
        train,
        test,
        test_labels,
        model,
        featurization,
        master_seed,
        CellBagging::default(),
    )
}

/// `run_cell` with explicit ensemble settings for the bagged cells.
#[allow(clippy::too_many_arguments)]
pub fn run_cell_with(
    train: &VectorizedDataset,
    test: &VectorizedDataset,
    test_labels: &[Label],
    model: BenchmarkModel,
    featurization: Featurization,
    master_seed: u64,
    bagging: CellBagging,
) -> Result<EvaluationReport, EvalError> {
    let train_seed = cell_seed(master_seed, model, featurization);
    let base_algorithm = match model {
        BenchmarkModel::NaiveBayes | BenchmarkModel::BaggedNaiveBayes => Algorithm::NaiveBayes,
        BenchmarkModel::LogisticRegression | BenchmarkModel::BaggedLogisticRegression => {
            Algorithm::LogisticRegression
        }
        BenchmarkModel::Svm => Algorithm::Svm,
        BenchmarkModel::Knn => Algorithm::Knn,
        BenchmarkModel::RandomForest => Algorithm::RandomForest,
    };
    let base_config = ModelConfig::default_for(base_algorithm, train_seed);
    let predictions = match model {
        BenchmarkModel::BaggedLogisticRegression | BenchmarkModel::BaggedNaiveBayes => {
            let config = BaggingConfig {
                base: base_config,
                n_estimators: bagging.n_estimators,
                seed: seed::derive(train_seed, 1),
                vote: bagging.vote,
            };
            let bagged = ensemble::fit_bagging(train, &config)?;
            ensemble::predict_bagged_all(&bagged, &test.matrix)?
        }
        _ => {
            let fitted = classifiers::fit(train, &base_config)?;
            classifiers::predict_all(&fitted, &test.matrix)?
        }
    };
    let matrix = confusion(&predictions, test_labels)?;
    Ok(EvaluationReport::new(model, featurization, matrix))
}

/// Train and evaluate every (model, featurization) cell. The vocabulary of
/// each featurization is fitted on the training documents only; test
/// documents are transformed with it. Reports come back row-major: all
/// featurizations of the first model, then the second, and so on.
pub fn run_matrix(
    train: &TokenizedCorpus,
    test: &TokenizedCorpus,
    models: &[BenchmarkModel],
    featurizations: &[Featurization],
    master_seed: u64,
) -> Result<Vec<EvaluationReport>, EvalError> {
    if train.documents.len() != train.labels.len() {
        return Err(EvalError::CorpusShape {
            documents: train.documents.len(),
            labels: train.labels.len(),
        });
    }
    if test.documents.len() != test.labels.len() {
        return Err(EvalError::CorpusShape {
            documents: test.documents.len(),
            labels: test.labels.len(),
        });
    }

    // vectorize once per featurization, shared across its column
    let mut columns = Vec::with_capacity(featurizations.len());
    for &featurization in featurizations {
        let (low, high) = featurization.ngram_range();
        let config = VectorizeConfig::with_ngram_range(low, high);
        let vocabulary = fit_vocabulary(&train.documents, &config)?;
        let train_matrix: Vec<SparseVector> = train
            .documents
            .iter()
            .map(|doc| transform(doc, &vocabulary, &config))
            .collect::<Result<_, _>>()?;
        let test_matrix: Vec<SparseVector> = test
            .documents
            .iter()
            .map(|doc| transform(doc, &vocabulary, &config))
            .collect::<Result<_, _>>()?;
        let train_ds = VectorizedDataset {
            matrix: train_matrix,
            labels: train.labels.clone(),
            vocabulary: vocabulary.clone(),
        };
        let test_ds = VectorizedDataset {
            matrix: test_matrix,
            labels: test.labels.clone(),
            vocabulary,
        };
        columns.push((featurization, train_ds, test_ds));
    }

    let cells: Vec<(BenchmarkModel, usize)> = models
        .iter()
        .flat_map(|&m| (0..columns.len()).map(move |c| (m, c)))
        .collect();
    let results: Vec<Result<EvaluationReport, EvalError>> = cells
        .par_iter()
        .map(|&(model, column)| {
            let (featurization, train_ds, test_ds) = &columns[column];
            run_cell(
                train_ds,
                test_ds,
                &test.labels,
                model,
                *featurization,
                master_seed,
            )
        })
        .collect();

    let mut reports = Vec::with_capacity(results.len());
    for result in results {
        reports.push(result?);
    }
    Ok(reports)
}

const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ReportFile {
    version: u32,
    reports: Vec<EvaluationReport>,
}

/// Write the full per-cell reports (confusion matrix included) as JSON.
pub fn reports_to_writer(
    reports: &[EvaluationReport],
    writer: impl Write,
) -> Result<(), EvalError> {
    let file = ReportFile {
        version: REPORT_FORMAT_VERSION,
        reports: reports.to_vec(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

/// Parse reports back, re-deriving every metric from its confusion matrix
/// and rejecting files where they disagree beyond 1e-12.
pub fn reports_from_reader(reader: impl Read) -> Result<Vec<EvaluationReport>, EvalError> {
    let file: ReportFile = serde_json::from_reader(reader)?;
    if file.version != REPORT_FORMAT_VERSION {
        return Err(EvalError::UnsupportedVersion(file.version));
    }
    for (i, report) in file.reports.iter().enumerate() {
        let c = report.confusion;
        let expected = [c.precision(), c.recall(), c.f_measure(), c.accuracy()];
        let stored = [
            report.precision,
            report.recall,
            report.f_measure,
            report.accuracy,
        ];
        for (name, (e, s)) in ["precision", "recall", "f_measure", "accuracy"]
            .iter()
            .zip(expected.iter().zip(stored))
        {
            if !(s.is_finite() && (e - s).abs() <= 1e-12) {
                return Err(EvalError::InvalidSerialization(format!(
                    "report {i}: {name} {s} does not match its confusion matrix ({e})"
                )));
            }
        }
    }
    Ok(file.reports)
}

/// Which derived metric a grid table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Accuracy,
    FMeasure,
}

impl TableMetric {
    fn of(self, report: &EvaluationReport) -> f64 {
        match self {
            TableMetric::Accuracy => report.accuracy,
            TableMetric::FMeasure => report.f_measure,
        }
    }
}

/// Export one metric of the grid as CSV: one row per model, one column per
/// featurization, in first-appearance order. A missing cell is left empty.
pub fn metric_table_csv(
    reports: &[EvaluationReport],
    metric: TableMetric,
    writer: impl Write,
) -> Result<(), EvalError> {
    let mut models: Vec<BenchmarkModel> = Vec::new();
    let mut featurizations: Vec<Featurization> = Vec::new();
    for report in reports {
        if !models.contains(&report.model) {
            models.push(report.model);
        }
        if !featurizations.contains(&report.featurization) {
            featurizations.push(report.featurization);
        }
    }

    let mut csv_writer = csv::Writer::from_writer(writer);
    let mut header = vec!["model".to_string()];
    header.extend(featurizations.iter().map(|f| f.name().to_string()));
    csv_writer.write_record(&header)?;
    for &model in &models {
        let mut row = vec![model.name().to_string()];
        for &featurization in &featurizations {
            let cell = reports
                .iter()
                .find(|r| r.model == model && r.featurization == featurization)
                .map(|r| metric.of(r).to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        csv_writer.write_record(&row)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn accuracy_table_csv(
    reports: &[EvaluationReport],
    writer: impl Write,
) -> Result<(), EvalError> {
    metric_table_csv(reports, TableMetric::Accuracy, writer)
}
