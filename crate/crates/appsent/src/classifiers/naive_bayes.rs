//! Multinomial naive Bayes over nonnegative feature weights.
//!
//! TF-IDF weights act as fractional counts: per-class likelihoods are
//! theta[c][j] = (alpha + sum of x_j over class c) / (alpha*F + total mass
//! of class c). Raw-count vectors work the same way, which is what the
//! hand-checkable oracle tests use.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::vectorize::{SparseVector, VectorizedDataset};

use super::ClassifierError;

/// Index 0 holds Positive, index 1 Negative, everywhere in this file.
const POS: usize = 0;
const NEG: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBParams {
    /// ln P(class), [Positive, Negative].
    pub class_log_prior: [f64; 2],
    /// ln theta[class][feature]; rows exponentiate-and-sum to 1.
    pub feature_log_likelihood: [Vec<f64>; 2],
    pub alpha: f64,
}

impl NBParams {
    pub fn dimension(&self) -> usize {
        self.feature_log_likelihood[POS].len()
    }

    fn joint_log_likelihood(&self, vector: &SparseVector) -> [f64; 2] {
        let mut scores = self.class_log_prior;
        for &(idx, weight) in &vector.entries {
            scores[POS] += weight * self.feature_log_likelihood[POS][idx];
            scores[NEG] += weight * self.feature_log_likelihood[NEG][idx];
        }
        scores
    }

    pub fn predict(&self, vector: &SparseVector) -> Label {
        let [pos, neg] = self.joint_log_likelihood(vector);
        // ties go to Positive
        if pos >= neg {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Posterior P(Positive | x), normalized over the two classes.
    pub fn score(&self, vector: &SparseVector) -> f64 {
        let [pos, neg] = self.joint_log_likelihood(vector);
        sigmoid(pos - neg)
    }

    pub(super) fn validate(&self) -> Result<(), String> {
        let f = self.feature_log_likelihood[POS].len();
        if self.feature_log_likelihood[NEG].len() != f {
            return Err("class likelihood rows differ in length".into());
        }
        if self
            .class_log_prior
            .iter()
            .any(|p| !p.is_finite() || *p > 0.0)
        {
            return Err("class log-priors must be finite and nonpositive".into());
        }
        for row in &self.feature_log_likelihood {
            if row.iter().any(|v| !v.is_finite()) {
                return Err("non-finite log-likelihood".into());
            }
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            if f > 0 && (total - 1.0).abs() > 1e-6 {
                return Err(format!("likelihood row sums to {total}, expected 1"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("bad alpha {}", self.alpha));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(super) fn fit(dataset: &VectorizedDataset, alpha: f64) -> Result<NBParams, ClassifierError> {
    let dimension = dataset
        .matrix
        .first()
        .map_or(dataset.vocabulary.len(), |v| v.dimension);

    let mut feature_mass = [vec![0.0f64; dimension], vec![0.0f64; dimension]];
    let mut doc_counts = [0usize; 2];
    for (row, (vector, label)) in dataset.matrix.iter().zip(&dataset.labels).enumerate() {
        let class = match label {
            Label::Positive => POS,
            Label::Negative => NEG,
        };
        doc_counts[class] += 1;
        for &(idx, weight) in &vector.entries {
            if weight < 0.0 {
                return Err(ClassifierError::NegativeFeature {
                    row,
                    feature: idx,
                    value: weight,
                });
            }
            feature_mass[class][idx] += weight;
        }
    }

    let n = dataset.matrix.len() as f64;
    let class_log_prior = [
        (doc_counts[POS] as f64 / n).ln(),
        (doc_counts[NEG] as f64 / n).ln(),
    ];

    let feature_log_likelihood = feature_mass.map(|mass| {
        let total: f64 = mass.iter().sum();
        let denominator = total + alpha * dimension as f64;
        mass.iter()
            .map(|&m| ((m + alpha) / denominator).ln())
            .collect()
    });

    Ok(NBParams {
        class_log_prior,
        feature_log_likelihood,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{fit as fit_model, predict, predict_score, ModelConfig, ModelSpec};
    use super::*;
    use proptest::prelude::*;

    fn toy() -> crate::vectorize::VectorizedDataset {
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
    fn toy_likelihoods_match_hand_computation() {
        let params = fit(&toy(), 1.0).unwrap();
        // P(good | Positive) = (2 + 1) / (2 + 2) = 0.75
        assert!((params.feature_log_likelihood[0][0].exp() - 0.75).abs() < 1e-12);
        assert!((params.feature_log_likelihood[0][1].exp() - 0.25).abs() < 1e-12);
        assert!((params.feature_log_likelihood[1][0].exp() - 0.25).abs() < 1e-12);
        assert!((params.feature_log_likelihood[1][1].exp() - 0.75).abs() < 1e-12);
        assert!((params.class_log_prior[0].exp() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn toy_posterior_on_good_is_three_quarters() {
        let config = ModelConfig::new(ModelSpec::NaiveBayes { alpha: 1.0 }, 0);
        let model = fit_model(&toy(), &config).unwrap();
        let good_doc = sparse(2, &[(0, 1.0)]);
        assert_eq!(predict(&model, &good_doc).unwrap(), Label::Positive);
        let score = predict_score(&model, &good_doc).unwrap();
        assert!((score - 0.75).abs() < 1e-12, "got {score}");
    }

    #[test]
    fn likelihood_rows_are_distributions() {
        let data = dataset_from_dense(
            &[
                vec![0.3, 1.2, 0.0],
                vec![0.0, 0.4, 2.0],
                vec![1.5, 0.0, 0.1],
            ],
            &[Label::Positive, Label::Negative, Label::Positive],
        );
        let params = fit(&data, 0.7).unwrap();
        for row in &params.feature_log_likelihood {
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9, "row sums to {total}");
        }
        params.validate().unwrap();
    }

    #[test]
    fn negative_features_are_rejected() {
        let data = dataset_from_dense(
            &[vec![1.0], vec![-0.5]],
            &[Label::Positive, Label::Negative],
        );
        assert!(matches!(
            fit(&data, 1.0),
            Err(ClassifierError::NegativeFeature { row: 1, .. })
        ));
    }

    /// Exhaustive joint-probability oracle over integer count vectors.
    fn oracle_posterior(
        docs: &[Vec<u32>],
        labels: &[Label],
        query: &[u32],
        alpha: f64,
    ) -> f64 {
        let f = docs[0].len();
        let classes = [Label::Positive, Label::Negative];
        let mut joint = [0.0f64; 2];
        for (ci, class) in classes.iter().enumerate() {
            let n_c = labels.iter().filter(|&l| l == class).count() as f64;
            let prior = n_c / labels.len() as f64;
            let mut counts = vec![0.0f64; f];
            for (doc, label) in docs.iter().zip(labels) {
                if label == class {
                    for (j, &c) in doc.iter().enumerate() {
                        counts[j] += c as f64;
                    }
                }
            }
            let total: f64 = counts.iter().sum();
            let mut p = prior;
            for (j, &q) in query.iter().enumerate() {
                let theta = (counts[j] + alpha) / (total + alpha * f as f64);
                p *= theta.powi(q as i32);
            }
            joint[ci] = p;
        }
        joint[0] / (joint[0] + joint[1])
    }

    proptest! {
        #[test]
        fn posterior_matches_exhaustive_oracle(
            rows in proptest::collection::vec(
                proptest::collection::vec(0u32..4, 3),
                2..6,
            ),
            query in proptest::collection::vec(0u32..4, 3),
            positives in 1usize..5,
        ) {
            let labels: Vec<Label> = (0..rows.len())
                .map(|i| if i < positives.min(rows.len() - 1) {
                    Label::Positive
                } else {
                    Label::Negative
                })
                .collect();
            let dense: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|&c| c as f64).collect())
                .collect();
            let data = dataset_from_dense(&dense, &labels);
            let params = fit(&data, 1.0).unwrap();
            let query_dense: Vec<f64> = query.iter().map(|&c| c as f64).collect();
            let query_vec = sparse(
                3,
                &query_dense
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect::<Vec<_>>(),
            );
            let got = params.score(&query_vec);
            let want = oracle_posterior(&rows, &labels, &query, 1.0);
            prop_assert!((got - want).abs() < 1e-9, "got {got}, oracle {want}");
        }
    }
}
