//! Bagging over any base classifier.
//!
//! Each member is trained from scratch on its own bootstrap resample of
//! the training set (same size, drawn with replacement). Prediction is a
//! majority vote by default, or an average of member scores. Scores on a
//! margin scale (the SVM's) pass through a logistic squash before any
//! averaging so the 0.5 threshold means the same thing for every base.
//!
//! If every member predicts the same label, that label is returned before
//! any score arithmetic runs, so unanimity can never be overturned by
//! score aggregation quirks under either vote mode.

use std::fs::{self, File};
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    self, Algorithm, ClassifierError, FittedModel, ModelConfig,
};
use crate::corpus::Label;
use crate::seed;
use crate::vectorize::{SparseVector, VectorizedDataset};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
    #[error("member {member} drew a single-class bootstrap 11 times in a row")]
    BootstrapRetriesExhausted { member: usize },
    #[error("ensemble holds no members")]
    EmptyEnsemble,
    #[error("inconsistent ensemble members: {0}")]
    InconsistentMembers(String),
    #[error("ensemble manifest is invalid: {0}")]
    InvalidManifest(String),
    #[error("unsupported ensemble format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// How member outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteMode {
    /// Majority vote over member labels; an exact tie goes to the side
    /// with the larger summed score mass.
    Hard,
    /// Mean member score (squashed to [0, 1] first where needed) >= 0.5
    /// predicts Positive.
    SoftAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggingConfig {
    pub base: ModelConfig,
    pub n_estimators: usize,
    pub seed: u64,
    pub vote: VoteMode,
}

impl BaggingConfig {
    pub fn new(base: ModelConfig, seed: u64) -> Self {
        BaggingConfig {
            base,
            n_estimators: 10,
            seed,
            vote: VoteMode::Hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaggedModel {
    pub members: Vec<FittedModel>,
    pub vote: VoteMode,
}

/// Draw a same-size resample uniformly with replacement; row i of the
/// output carries the label of the row it was copied from.
pub fn bootstrap_sample(
    dataset: &VectorizedDataset,
    sample_seed: u64,
) -> Result<VectorizedDataset, EnsembleError> {
    if dataset.matrix.is_empty() {
        return Err(ClassifierError::EmptyDataset.into());
    }
    let n = dataset.matrix.len();
    let mut rng = seed::rng(sample_seed);
    let mut matrix = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rand::Rng::gen_range(&mut rng, 0..n);
        matrix.push(dataset.matrix[i].clone());
        labels.push(dataset.labels[i]);
    }
    Ok(VectorizedDataset {
        matrix,
        labels,
        vocabulary: dataset.vocabulary.clone(),
    })
}

fn has_both_classes(labels: &[Label]) -> bool {
    labels.contains(&Label::Positive) && labels.contains(&Label::Negative)
}

/// Train `n_estimators` members, member i on a resample seeded with stream
/// i of the ensemble seed. The base config (its seed included) is used
/// verbatim for every member, so all diversity comes from the resamples. A
/// member whose resample contains one class only redraws with a fresh
/// derived seed, up to 10 retries.
pub fn fit_bagging(
    dataset: &VectorizedDataset,
    config: &BaggingConfig,
) -> Result<BaggedModel, EnsembleError> {
    fit_with_sampler(dataset, config, |data, sample_seed| {
        bootstrap_sample(data, sample_seed).expect("dataset checked non-empty")
    })
}

/// `fit_bagging` with the resampling step injectable, so tests can force
/// an identity "bootstrap" and compare members against the base model.
fn fit_with_sampler<S>(
    dataset: &VectorizedDataset,
    config: &BaggingConfig,
    sampler: S,
) -> Result<BaggedModel, EnsembleError>
where
    S: Fn(&VectorizedDataset, u64) -> VectorizedDataset + Sync,
{
    if config.n_estimators == 0 {
        return Err(EnsembleError::InvalidConfig(
            "n_estimators must be at least 1".into(),
        ));
    }
    if dataset.matrix.is_empty() {
        return Err(ClassifierError::EmptyDataset.into());
    }
    if !has_both_classes(&dataset.labels) {
        return Err(ClassifierError::SingleClassDataset.into());
    }

    // train in parallel but surface the first error in member order, so a
    // failure is as deterministic as a success
    let results: Vec<Result<FittedModel, EnsembleError>> = (0..config.n_estimators)
        .into_par_iter()
        .map(|i| {
            let member_seed = seed::derive(config.seed, i as u64);
            let mut sample_seed = member_seed;
            let mut attempt = 0;
            loop {
                let sample = sampler(dataset, sample_seed);
                if has_both_classes(&sample.labels) {
                    return classifiers::fit(&sample, &config.base).map_err(EnsembleError::from);
                }
                attempt += 1;
                if attempt > 10 {
                    return Err(EnsembleError::BootstrapRetriesExhausted { member: i });
                }
                sample_seed = seed::derive(member_seed, attempt);
            }
        })
        .collect();

    let mut members = Vec::with_capacity(results.len());
    for result in results {
        members.push(result?);
    }
    Ok(BaggedModel {
        members,
        vote: config.vote,
    })
}

/// A member's score on the common [0, 1] scale: raw-margin scores are
/// squashed through the logistic function, probability-like scores pass
/// through unchanged.
fn squashed_score(member: &FittedModel, vector: &SparseVector) -> Result<f64, EnsembleError> {
    let score = classifiers::predict_score(member, vector)?;
    Ok(match member.algorithm() {
        Algorithm::Svm => classifiers::sigmoid(score),
        _ => score,
    })
}

/// Combine member predictions under the model's vote mode. Unanimous
/// members win immediately under either mode.
pub fn predict_bagged(model: &BaggedModel, vector: &SparseVector) -> Result<Label, EnsembleError> {
    if model.members.is_empty() {
        return Err(EnsembleError::EmptyEnsemble);
    }
    let votes = model
        .members
        .iter()
        .map(|m| classifiers::predict(m, vector))
        .collect::<Result<Vec<Label>, ClassifierError>>()?;
    if votes.iter().all(|&l| l == votes[0]) {
        return Ok(votes[0]);
    }

    let mean_score = || -> Result<f64, EnsembleError> {
        let mut sum = 0.0;
        for member in &model.members {
            sum += squashed_score(member, vector)?;
        }
        Ok(sum / model.members.len() as f64)
    };

    match model.vote {
        VoteMode::Hard => {
            let positive = votes.iter().filter(|&&l| l == Label::Positive).count();
            let negative = votes.len() - positive;
            match positive.cmp(&negative) {
                std::cmp::Ordering::Greater => Ok(Label::Positive),
                std::cmp::Ordering::Less => Ok(Label::Negative),
                // tie: the side with the larger score mass wins; summed
                // positive evidence is sum(s), negative is sum(1 - s), so
                // comparing them reduces to the mean against 0.5
                std::cmp::Ordering::Equal => Ok(if mean_score()? >= 0.5 {
                    Label::Positive
                } else {
                    Label::Negative
                }),
            }
        }
        VoteMode::SoftAverage => Ok(if mean_score()? >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        }),
    }
}

/// Predict a whole matrix in row order.
pub fn predict_bagged_all(
    model: &BaggedModel,
    matrix: &[SparseVector],
) -> Result<Vec<Label>, EnsembleError> {
    matrix.iter().map(|v| predict_bagged(model, v)).collect()
}

const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    vote: VoteMode,
    /// File names of the member models, relative to the manifest.
    members: Vec<String>,
}

impl BaggedModel {
    /// Write a manifest plus one model document per member into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), EnsembleError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.members.len());
        for (i, member) in self.members.iter().enumerate() {
            let name = format!("member-{i:03}.json");
            member.to_path(dir.join(&name))?;
            names.push(name);
        }
        let manifest = ManifestFile {
            version: ENSEMBLE_FORMAT_VERSION,
            vote: self.vote,
            members: names,
        };
        serde_json::to_writer_pretty(File::create(dir.join("manifest.json"))?, &manifest)?;
        Ok(())
    }

    /// Load and validate a saved ensemble: every member document is
    /// revalidated, and all members must share algorithm and dimension.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EnsembleError> {
        let dir = dir.as_ref();
        let manifest: ManifestFile =
            serde_json::from_reader(File::open(dir.join("manifest.json"))?)?;
        if manifest.version != ENSEMBLE_FORMAT_VERSION {
            return Err(EnsembleError::UnsupportedVersion(manifest.version));
        }
        if manifest.members.is_empty() {
            return Err(EnsembleError::EmptyEnsemble);
        }
        let mut members = Vec::with_capacity(manifest.members.len());
        for name in &manifest.members {
            if name.contains('/') || name.contains('\\') || name.contains("..") {
                return Err(EnsembleError::InvalidManifest(format!(
                    "member name {name:?} must be a plain file name"
                )));
            }
            members.push(FittedModel::from_path(dir.join(name))?);
        }
        let algorithm = members[0].algorithm();
        let dimension = members[0].dimension();
        for (i, member) in members.iter().enumerate() {
            if member.algorithm() != algorithm || member.dimension() != dimension {
                return Err(EnsembleError::InconsistentMembers(format!(
                    "member {i} is {:?}/dim {}, member 0 is {algorithm:?}/dim {dimension}",
                    member.algorithm(),
                    member.dimension(),
                )));
            }
        }
        Ok(BaggedModel {
            members,
            vote: manifest.vote,
        })
    }
}
