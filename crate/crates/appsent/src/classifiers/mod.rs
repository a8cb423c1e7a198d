//! Five classifiers behind one fit/predict contract: multinomial naive
//! Bayes, logistic regression, a linear SVM, k-nearest-neighbors, and a
//! random forest. All five are implemented from first principles; nothing
//! is delegated to an ML library.
//!
//! Training is deterministic: the same dataset, hyperparameters, and seed
//! produce an identical [`FittedModel`] byte for byte, regardless of thread
//! scheduling.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::vectorize::{SparseVector, VectorizedDataset};

mod forest;
mod knn;
mod linear;
mod naive_bayes;

pub use forest::{Forest, Tree, TreeNode};
pub use knn::KnnIndex;
pub use linear::{logistic_loss_and_gradient, LinearKind, LinearParams};
pub use naive_bayes::NBParams;

pub(crate) use linear::sigmoid;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class only")]
    SingleClassDataset,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("naive Bayes requires nonnegative features; row {row} feature {feature} is {value}")]
    NegativeFeature {
        row: usize,
        feature: usize,
        value: f64,
    },
    #[error("dimension mismatch: model expects {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model file is invalid: {0}")]
    InvalidSerialization(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    NaiveBayes,
    LogisticRegression,
    Svm,
    Knn,
    RandomForest,
}

impl Algorithm {
    /// Short table name used in reports and seed derivation.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NaiveBayes => "NB",
            Algorithm::LogisticRegression => "LR",
            Algorithm::Svm => "SVM",
            Algorithm::Knn => "KNN",
            Algorithm::RandomForest => "RF",
        }
    }

    pub const ALL: [Algorithm; 5] = [
        Algorithm::NaiveBayes,
        Algorithm::LogisticRegression,
        Algorithm::Svm,
        Algorithm::Knn,
        Algorithm::RandomForest,
    ];
}

/// Algorithm choice plus validated hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    NaiveBayes {
        /// Laplace smoothing pseudo-count.
        alpha: f64,
    },
    LogisticRegression {
        /// L2 penalty on the weights; the bias is never penalized.
        lambda: f64,
        /// Fixed gradient-descent step size.
        step: f64,
        max_epochs: usize,
        /// Stop when the gradient infinity-norm falls below this.
        tolerance: f64,
    },
    Svm {
        /// Regularization constant in the 1/(lambda t) step schedule.
        lambda: f64,
        epochs: usize,
    },
    Knn {
        k: usize,
    },
    RandomForest {
        n_trees: usize,
        /// Train each tree on a bootstrap resample (true) or on the full
        /// dataset (false).
        bootstrap: bool,
        /// Features examined per split; `None` means ceil(sqrt(F)).
        split_candidates: Option<usize>,
    },
}

impl ModelSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            ModelSpec::NaiveBayes { .. } => Algorithm::NaiveBayes,
            ModelSpec::LogisticRegression { .. } => Algorithm::LogisticRegression,
            ModelSpec::Svm { .. } => Algorithm::Svm,
            ModelSpec::Knn { .. } => Algorithm::Knn,
            ModelSpec::RandomForest { .. } => Algorithm::RandomForest,
        }
    }

    /// The hyperparameter defaults used throughout the benchmark.
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::NaiveBayes => ModelSpec::NaiveBayes { alpha: 1.0 },
            Algorithm::LogisticRegression => ModelSpec::LogisticRegression {
                lambda: 1e-4,
                step: 0.5,
                max_epochs: 1000,
                tolerance: 1e-6,
            },
            Algorithm::Svm => ModelSpec::Svm {
                lambda: 1e-4,
                epochs: 20,
            },
            Algorithm::Knn => ModelSpec::Knn { k: 5 },
            Algorithm::RandomForest => ModelSpec::RandomForest {
                n_trees: 100,
                bootstrap: true,
                split_candidates: None,
            },
        }
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |msg: String| Err(ClassifierError::InvalidHyperparameter(msg));
        match *self {
            ModelSpec::NaiveBayes { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return bad(format!("alpha must be positive and finite, got {alpha}"));
                }
            }
            ModelSpec::LogisticRegression {
                lambda,
                step,
                max_epochs,
                tolerance,
            } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("lambda must be nonnegative, got {lambda}"));
                }
                if !(step > 0.0 && step.is_finite()) {
                    return bad(format!("step must be positive, got {step}"));
                }
                if max_epochs == 0 {
                    return bad("max_epochs must be at least 1".into());
                }
                if !(tolerance >= 0.0 && tolerance.is_finite()) {
                    return bad(format!("tolerance must be nonnegative, got {tolerance}"));
                }
            }
            ModelSpec::Svm { lambda, epochs } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad(format!("lambda must be positive, got {lambda}"));
                }
                if epochs == 0 {
                    return bad("epochs must be at least 1".into());
                }
            }
            ModelSpec::Knn { k } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
            }
            ModelSpec::RandomForest {
                n_trees,
                split_candidates,
                ..
            } => {
                if n_trees == 0 {
                    return bad("n_trees must be at least 1".into());
                }
                if split_candidates == Some(0) {
                    return bad("split_candidates must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Everything `fit` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        ModelConfig { spec, seed }
    }

    pub fn default_for(algorithm: Algorithm, seed: u64) -> Self {
        ModelConfig {
            spec: ModelSpec::default_for(algorithm),
            seed,
        }
    }
}

/// A trained classifier, ready for prediction and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    NaiveBayes(NBParams),
    Linear(LinearParams),
    Knn(KnnIndex),
    Forest(Forest),
}

impl FittedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            FittedModel::NaiveBayes(_) => Algorithm::NaiveBayes,
            FittedModel::Linear(p) => match p.kind {
                LinearKind::Logistic => Algorithm::LogisticRegression,
                LinearKind::Svm => Algorithm::Svm,
            },
            FittedModel::Knn(_) => Algorithm::Knn,
            FittedModel::Forest(_) => Algorithm::RandomForest,
        }
    }

    /// Feature-space dimension the model was trained on.
    pub fn dimension(&self) -> usize {
        match self {
            FittedModel::NaiveBayes(p) => p.dimension(),
            FittedModel::Linear(p) => p.weights.len(),
            FittedModel::Knn(p) => p.dimension(),
            FittedModel::Forest(p) => p.dimension,
        }
    }

    fn check_dimension(&self, vector: &SparseVector) -> Result<(), ClassifierError> {
        if vector.dimension != self.dimension() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dimension(),
                found: vector.dimension,
            });
        }
        Ok(())
    }
}

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    (pos, labels.len() - pos)
}

fn check_dataset(dataset: &VectorizedDataset) -> Result<(), ClassifierError> {
    if dataset.matrix.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let (pos, neg) = class_counts(&dataset.labels);
    if pos == 0 || neg == 0 {
        return Err(ClassifierError::SingleClassDataset);
    }
    Ok(())
}

/// Train a classifier. Deterministic given (dataset, config), including the
/// seed; requires both classes to be present.
pub fn fit(dataset: &VectorizedDataset, config: &ModelConfig) -> Result<FittedModel, ClassifierError> {
    config.spec.validate()?;
    check_dataset(dataset)?;
    match config.spec {
        ModelSpec::NaiveBayes { alpha } => naive_bayes::fit(dataset, alpha).map(FittedModel::NaiveBayes),
        ModelSpec::LogisticRegression {
            lambda,
            step,
            max_epochs,
            tolerance,
        } => Ok(FittedModel::Linear(linear::fit_logistic(
            dataset, lambda, step, max_epochs, tolerance,
        ))),
        ModelSpec::Svm { lambda, epochs } => Ok(FittedModel::Linear(linear::fit_svm(
            dataset,
            lambda,
            epochs,
            config.seed,
        ))),
        ModelSpec::Knn { k } => Ok(FittedModel::Knn(knn::fit(dataset, k))),
        ModelSpec::RandomForest {
            n_trees,
            bootstrap,
            split_candidates,
        } => Ok(FittedModel::Forest(forest::fit(
            dataset,
            n_trees,
            bootstrap,
            split_candidates,
            config.seed,
        ))),
    }
}

/// Predict the label for one vector.
pub fn predict(model: &FittedModel, vector: &SparseVector) -> Result<Label, ClassifierError> {
    model.check_dimension(vector)?;
    Ok(match model {
        FittedModel::NaiveBayes(p) => p.predict(vector),
        FittedModel::Linear(p) => p.predict(vector),
        FittedModel::Knn(p) => p.predict(vector),
        FittedModel::Forest(p) => p.predict(vector),
    })
}

/// A confidence for the Positive class, monotone per algorithm: posterior
/// probability (NB, LR), raw margin (SVM), positive-vote fraction (KNN),
/// positive-tree fraction (RF).
pub fn predict_score(model: &FittedModel, vector: &SparseVector) -> Result<f64, ClassifierError> {
    model.check_dimension(vector)?;
    Ok(match model {
        FittedModel::NaiveBayes(p) => p.score(vector),
        FittedModel::Linear(p) => p.score(vector),
        FittedModel::Knn(p) => p.score(vector),
        FittedModel::Forest(p) => p.score(vector),
    })
}

/// Predict a whole test matrix in row order.
pub fn predict_all(
    model: &FittedModel,
    matrix: &[SparseVector],
) -> Result<Vec<Label>, ClassifierError> {
    matrix.iter().map(|v| predict(model, v)).collect()
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: FittedModel,
}

impl FittedModel {
    /// Serialize to the versioned JSON model format. Round-trips exactly:
    /// floating-point values survive bit for bit.
    pub fn to_writer(&self, writer: impl Write) -> Result<(), ClassifierError> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        self.to_writer(File::create(path)?)
    }

    /// Parse and validate the JSON model format. Every structural invariant
    /// is re-checked so a corrupted or hand-edited file cannot produce a
    /// model that panics at prediction time.
    pub fn from_reader(reader: impl Read) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::UnsupportedVersion(file.version));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::from_reader(File::open(path)?)
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        let invalid = |msg: String| Err(ClassifierError::InvalidSerialization(msg));
        match self {
            FittedModel::NaiveBayes(p) => p.validate().map_err(ClassifierError::InvalidSerialization),
            FittedModel::Linear(p) => {
                if !p.bias.is_finite() || p.weights.iter().any(|w| !w.is_finite()) {
                    return invalid("non-finite linear parameters".into());
                }
                Ok(())
            }
            FittedModel::Knn(p) => p.validate().map_err(ClassifierError::InvalidSerialization),
            FittedModel::Forest(p) => p.validate().map_err(ClassifierError::InvalidSerialization),
        }
    }
}

/// Validate an untrusted sparse vector (e.g. from a serialized model file):
/// strictly increasing in-range indices, finite weights.
pub(crate) fn validate_sparse_vector(v: &SparseVector) -> Result<(), String> {
    let mut last: Option<usize> = None;
    for &(idx, w) in &v.entries {
        if idx >= v.dimension {
            return Err(format!("index {idx} out of range for dimension {}", v.dimension));
        }
        if let Some(prev) = last {
            if idx <= prev {
                return Err(format!("indices not strictly increasing at {idx}"));
            }
        }
        if !w.is_finite() {
            return Err(format!("non-finite weight at index {idx}"));
        }
        last = Some(idx);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::vectorize::Vocabulary;

    /// Hand-build a dataset from dense rows without running the vectorizer.
    pub fn dataset_from_dense(rows: &[Vec<f64>], labels: &[Label]) -> VectorizedDataset {
        let dimension = rows.first().map_or(0, Vec::len);
        let matrix = rows
            .iter()
            .map(|row| SparseVector {
                dimension,
                entries: row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect(),
            })
            .collect();
        VectorizedDataset {
            matrix,
            labels: labels.to_vec(),
            vocabulary: placeholder_vocabulary(dimension),
        }
    }

    /// A vocabulary whose terms are just column numbers; good enough for
    /// classifier tests that never look terms up.
    pub fn placeholder_vocabulary(dimension: usize) -> Vocabulary {
        use crate::textprep::TokenizedDocument;
        use crate::vectorize::{fit_vocabulary, VectorizeConfig};
        let tokens: Vec<String> = (0..dimension).map(|i| format!("f{i:04}")).collect();
        let doc = TokenizedDocument {
            doc_id: 0,
            tokens,
            original_length: 0,
        };
        let config = VectorizeConfig {
            max_features: None,
            allow_empty_vocabulary: true,
            ..VectorizeConfig::default()
        };
        fit_vocabulary(&[doc], &config).expect("placeholder vocabulary")
    }

    pub fn sparse(dimension: usize, entries: &[(usize, f64)]) -> SparseVector {
        SparseVector {
            dimension,
            entries: entries.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    fn toy_dataset() -> VectorizedDataset {
        // vocab {good, bad}; two Positive docs containing "good", two
        // Negative docs containing "bad", raw counts
        dataset_from_dense(
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
            ],
            &[
                Label::Positive,
                Label::Positive,
                Label::Negative,
                Label::Negative,
            ],
        )
    }

    #[test]
    fn fit_rejects_degenerate_datasets() {
        let empty = dataset_from_dense(&[], &[]);
        let config = ModelConfig::default_for(Algorithm::NaiveBayes, 1);
        assert!(matches!(
            fit(&empty, &config),
            Err(ClassifierError::EmptyDataset)
        ));

        let single = dataset_from_dense(&[vec![1.0], vec![0.5]], &[Label::Positive, Label::Positive]);
        assert!(matches!(
            fit(&single, &config),
            Err(ClassifierError::SingleClassDataset)
        ));
    }

    #[test]
    fn fit_validates_hyperparameters() {
        let data = toy_dataset();
        let bad = [
            ModelSpec::NaiveBayes { alpha: 0.0 },
            ModelSpec::NaiveBayes { alpha: -1.0 },
            ModelSpec::Knn { k: 0 },
            ModelSpec::Svm {
                lambda: 0.0,
                epochs: 20,
            },
            ModelSpec::RandomForest {
                n_trees: 0,
                bootstrap: true,
                split_candidates: None,
            },
            ModelSpec::LogisticRegression {
                lambda: 1e-4,
                step: 0.0,
                max_epochs: 100,
                tolerance: 1e-6,
            },
        ];
        for spec in bad {
            let config = ModelConfig::new(spec, 1);
            assert!(
                matches!(
                    fit(&data, &config),
                    Err(ClassifierError::InvalidHyperparameter(_))
                ),
                "{config:?} should be rejected"
            );
        }
    }

    #[test]
    fn predict_checks_dimensions() {
        let data = toy_dataset();
        let model = fit(&data, &ModelConfig::default_for(Algorithm::NaiveBayes, 1)).unwrap();
        let wrong = sparse(5, &[(0, 1.0)]);
        assert!(matches!(
            predict(&model, &wrong),
            Err(ClassifierError::DimensionMismatch { expected: 2, found: 5 })
        ));
        assert!(matches!(
            predict_score(&model, &wrong),
            Err(ClassifierError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn all_algorithms_fit_and_serialize_round_trip() {
        let data = toy_dataset();
        for algorithm in Algorithm::ALL {
            let config = ModelConfig::default_for(algorithm, 99);
            let model = fit(&data, &config).unwrap();
            assert_eq!(model.algorithm(), algorithm);
            assert_eq!(model.dimension(), 2);

            let mut buf = Vec::new();
            model.to_writer(&mut buf).unwrap();
            let back = FittedModel::from_reader(buf.as_slice()).unwrap();
            assert_eq!(model, back, "{algorithm:?} round trip");

            // and the reloaded model predicts identically
            let probe = sparse(2, &[(0, 1.0)]);
            assert_eq!(
                predict(&model, &probe).unwrap(),
                predict(&back, &probe).unwrap()
            );
        }
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let data = toy_dataset();
        for algorithm in Algorithm::ALL {
            let config = ModelConfig::default_for(algorithm, 7);
            let a = fit(&data, &config).unwrap();
            let b = fit(&data, &config).unwrap();
            let mut buf_a = Vec::new();
            let mut buf_b = Vec::new();
            a.to_writer(&mut buf_a).unwrap();
            b.to_writer(&mut buf_b).unwrap();
            assert_eq!(buf_a, buf_b, "{algorithm:?} serialization must be identical");
        }
    }

    #[test]
    fn model_loader_rejects_garbage() {
        assert!(FittedModel::from_reader(&b"not json"[..]).is_err());
        assert!(FittedModel::from_reader(&b"{}"[..]).is_err());
        let wrong_version = br#"{"version":42,"model":{"Linear":{"kind":"Svm","weights":[0.0],"bias":0.0}}}"#;
        assert!(matches!(
            FittedModel::from_reader(&wrong_version[..]),
            Err(ClassifierError::UnsupportedVersion(42))
        ));
    }
}
